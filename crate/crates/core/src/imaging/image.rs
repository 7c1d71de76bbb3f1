use super::ImagingError;

/// RGB rasters smaller than this on either side are rejected.
pub const MIN_RGB_DIM: usize = 64;

/// Row-major interleaved 8-bit RGB raster.
#[derive(Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for RgbImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RgbImage({}x{})", self.width, self.height)
    }
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImagingError> {
        if width < MIN_RGB_DIM || height < MIN_RGB_DIM {
            return Err(ImagingError::Dimensions {
                width,
                height,
                reason: "RGB images must be at least 64x64",
            });
        }
        if data.len() != width * height * 3 {
            return Err(ImagingError::Dimensions {
                width,
                height,
                reason: "data length must equal width*height*3",
            });
        }
        Ok(RgbImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self, ImagingError> {
        let data = std::iter::repeat_n(rgb, width * height).flatten().collect();
        RgbImage::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

/// Row-major 8-bit single-channel raster.
#[derive(Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GrayImage({}x{})", self.width, self.height)
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(ImagingError::Dimensions {
                width,
                height,
                reason: "data length must equal width*height and be non-empty",
            });
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, ImagingError> {
        GrayImage::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Bilinear sample at real coordinates, clamping to the border.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        bilinear(&self.data, self.width, self.height, 1, 0, x, y)
    }
}

#[inline]
pub(crate) fn bilinear(
    data: &[u8],
    width: usize,
    height: usize,
    stride: usize,
    channel: usize,
    x: f64,
    y: f64,
) -> f64 {
    let max_x = (width - 1) as f64;
    let max_y = (height - 1) as f64;
    let x = x.clamp(0.0, max_x);
    let y = y.clamp(0.0, max_y);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let at = |xx: usize, yy: usize| data[(yy * width + xx) * stride + channel] as f64;
    let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
    let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Round half up and clamp into the 8-bit range.
#[inline]
pub(crate) fn quantize(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Splits an RGB raster into its R, G and B planes.
pub fn split_rgb(img: &RgbImage) -> (GrayImage, GrayImage, GrayImage) {
    let n = img.width * img.height;
    let mut planes = [
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    ];
    for px in img.data.chunks_exact(3) {
        planes[0].push(px[0]);
        planes[1].push(px[1]);
        planes[2].push(px[2]);
    }
    let [r, g, b] = planes;
    let mk = |data| GrayImage {
        width: img.width,
        height: img.height,
        data,
    };
    (mk(r), mk(g), mk(b))
}

/// Inverse of [`split_rgb`].
pub fn recombine(r: &GrayImage, g: &GrayImage, b: &GrayImage) -> Result<RgbImage, ImagingError> {
    if (r.width, r.height) != (g.width, g.height) || (r.width, r.height) != (b.width, b.height) {
        return Err(ImagingError::Dimensions {
            width: r.width,
            height: r.height,
            reason: "planes differ in size",
        });
    }
    let data = r
        .data
        .iter()
        .zip(&g.data)
        .zip(&b.data)
        .flat_map(|((&r, &g), &b)| [r, g, b])
        .collect();
    RgbImage::new(r.width, r.height, data)
}

/// Linear min-max stretch onto `0..=255` with round-half-up.
/// A constant image is returned unchanged.
pub fn photometric_align(img: &GrayImage) -> GrayImage {
    let min = *img.data.iter().min().expect("non-empty image") as u32;
    let max = *img.data.iter().max().expect("non-empty image") as u32;
    if min == max {
        return img.clone();
    }
    let span = max - min;
    // round((v - min) * 255 / span) with halves rounded up, in exact integer arithmetic
    let data = img
        .data
        .iter()
        .map(|&v| (((v as u32 - min) * 510 + span) / (2 * span)) as u8)
        .collect();
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rgb_rejects_small_or_mismatched() {
        assert!(RgbImage::new(63, 64, vec![0; 63 * 64 * 3]).is_err());
        assert!(RgbImage::new(64, 64, vec![0; 10]).is_err());
        assert!(RgbImage::new(64, 64, vec![0; 64 * 64 * 3]).is_ok());
    }

    #[test]
    fn split_all_red() {
        let img = RgbImage::filled(64, 64, [255, 0, 0]).unwrap();
        let (r, g, b) = split_rgb(&img);
        assert!(r.as_bytes().iter().all(|&v| v == 255));
        assert!(g.as_bytes().iter().all(|&v| v == 0));
        assert!(b.as_bytes().iter().all(|&v| v == 0));
    }

    #[test]
    fn split_single_pixel_channels() {
        let mut img = RgbImage::filled(64, 64, [0, 0, 0]).unwrap();
        img.put(0, 0, [10, 20, 30]);
        let (r, g, b) = split_rgb(&img);
        assert_eq!((r.get(0, 0), g.get(0, 0), b.get(0, 0)), (10, 20, 30));
    }

    #[test]
    fn align_linear_map() {
        let mut data = vec![50u8; 64];
        data[1] = 100;
        data[2] = 75;
        let out = photometric_align(&GrayImage::new(8, 8, data).unwrap());
        assert_eq!(out.get(0, 0), 0);
        assert_eq!(out.get(1, 0), 255);
        assert_eq!(out.get(2, 0), 128);
    }

    #[test]
    fn align_full_range_and_constant_unchanged() {
        let data: Vec<u8> = (0..=255).collect();
        let img = GrayImage::new(16, 16, data).unwrap();
        assert_eq!(photometric_align(&img), img);
        let flat = GrayImage::filled(8, 8, 77).unwrap();
        assert_eq!(photometric_align(&flat), flat);
    }

    proptest! {
        #[test]
        fn split_recombine_is_lossless(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<u8> = (0..64 * 70 * 3).map(|_| rng.random()).collect();
            let img = RgbImage::new(64, 70, data).unwrap();
            let (r, g, b) = split_rgb(&img);
            prop_assert_eq!(recombine(&r, &g, &b).unwrap(), img);
        }

        #[test]
        fn align_is_idempotent(data in proptest::collection::vec(any::<u8>(), 64)) {
            let img = GrayImage::new(8, 8, data).unwrap();
            let once = photometric_align(&img);
            prop_assert_eq!(photometric_align(&once), once);
        }
    }
}
