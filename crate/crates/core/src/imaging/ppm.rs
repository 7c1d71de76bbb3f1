//! Binary PPM (P6) and PGM (P5) codecs, maxval 255.

use std::fs;
use std::path::Path;

use super::{GrayImage, ImagingError, RgbImage};

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.as_bytes());
    out
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.as_bytes());
    out
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage, ImagingError> {
    let (w, h, body) = parse_header(bytes, b"P6")?;
    let need = w * h * 3;
    if body.len() < need {
        return Err(ImagingError::Pnm(format!("expected {need} bytes of pixels, got {}", body.len())));
    }
    RgbImage::new(w, h, body[..need].to_vec())
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, ImagingError> {
    let (w, h, body) = parse_header(bytes, b"P5")?;
    let need = w * h;
    if body.len() < need {
        return Err(ImagingError::Pnm(format!("expected {need} bytes of pixels, got {}", body.len())));
    }
    GrayImage::new(w, h, body[..need].to_vec())
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<RgbImage, ImagingError> {
    decode_ppm(&fs::read(path)?)
}

pub fn write_ppm(path: impl AsRef<Path>, img: &RgbImage) -> Result<(), ImagingError> {
    Ok(fs::write(path, encode_ppm(img))?)
}

pub fn write_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<(), ImagingError> {
    Ok(fs::write(path, encode_pgm(img))?)
}

fn parse_header<'a>(bytes: &'a [u8], magic: &[u8]) -> Result<(usize, usize, &'a [u8]), ImagingError> {
    if !bytes.starts_with(magic) {
        return Err(ImagingError::Pnm(format!(
            "missing {} magic",
            String::from_utf8_lossy(magic)
        )));
    }
    let mut pos = magic.len();
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and '#' comments may separate header tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImagingError::Pnm("malformed header".into()))?;
    }
    if fields[2] != 255 {
        return Err(ImagingError::Pnm(format!("unsupported maxval {}", fields[2])));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(ImagingError::Pnm("missing separator after header".into()));
    }
    Ok((fields[0], fields[1], &bytes[pos + 1..]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_roundtrip_with_comment() {
        let mut img = RgbImage::filled(64, 65, [1, 2, 3]).unwrap();
        img.put(5, 7, [200, 100, 50]);
        let bytes = encode_ppm(&img);
        assert_eq!(decode_ppm(&bytes).unwrap(), img);

        let mut commented = b"P6\n# made by hand\n64 65\n255\n".to_vec();
        commented.extend_from_slice(img.as_bytes());
        assert_eq!(decode_ppm(&commented).unwrap(), img);
    }

    #[test]
    fn pgm_roundtrip_and_errors() {
        let img = GrayImage::new(3, 2, vec![0, 1, 2, 3, 4, 5]).unwrap();
        assert_eq!(decode_pgm(&encode_pgm(&img)).unwrap(), img);
        assert!(decode_pgm(b"P6\n3 2\n255\n......").is_err());
        assert!(decode_pgm(b"P5\n3 2\n65535\n......").is_err());
        assert!(decode_pgm(b"P5\n3 2\n255\n...").is_err());
    }
}
