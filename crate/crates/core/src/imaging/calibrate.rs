use serde::{Deserialize, Serialize};

use super::image::{bilinear, quantize};
use super::{ImagingError, RgbImage, MIN_RGB_DIM};
use crate::segmentation::EyeGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSpec {
    pub target_size: usize,
    pub target_center: [f64; 2],
}

impl CalibrationSpec {
    /// Square target whose center is `size / 2` on both axes.
    pub fn square(size: usize) -> Self {
        CalibrationSpec {
            target_size: size,
            target_center: [size as f64 / 2.0, size as f64 / 2.0],
        }
    }
}

/// Resamples `img` onto a `target_size` square.
///
/// Output pixel `d` reads source position `anchor + (d - target_center) * s`
/// with `s = min(w, h) / target_size`. The anchor is the hinted pupil center
/// when a hint is given, else the frame center `(w/2, h/2)`. Samples are
/// bilinear, clamped at the border, quantized round-half-up.
pub fn geometric_calibrate(
    img: &RgbImage,
    spec: &CalibrationSpec,
    geometry_hint: Option<&EyeGeometry>,
) -> Result<RgbImage, ImagingError> {
    let (w, h) = (img.width(), img.height());
    let short = w.min(h);
    if spec.target_size < MIN_RGB_DIM {
        return Err(ImagingError::Calibration(format!(
            "target size {} below {MIN_RGB_DIM}",
            spec.target_size
        )));
    }
    if spec.target_size > 4 * short {
        return Err(ImagingError::Calibration(format!(
            "target size {} exceeds 4x source {short}",
            spec.target_size
        )));
    }
    let scale = short as f64 / spec.target_size as f64;
    let anchor = match geometry_hint {
        Some(g) => [g.pupil.cx, g.pupil.cy],
        None => [w as f64 / 2.0, h as f64 / 2.0],
    };
    let n = spec.target_size;
    let mut data = Vec::with_capacity(n * n * 3);
    for v in 0..n {
        let sy = anchor[1] + (v as f64 - spec.target_center[1]) * scale;
        for u in 0..n {
            let sx = anchor[0] + (u as f64 - spec.target_center[0]) * scale;
            for c in 0..3 {
                data.push(quantize(bilinear(img.as_bytes(), w, h, 3, c, sx, sy)));
            }
        }
    }
    RgbImage::new(n, n, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{generate_synthetic_eye, EyeParams};

    #[test]
    fn identity_spec_is_byte_identical() {
        let img = generate_synthetic_eye(&EyeParams {
            noise_sigma: 3.0,
            ..EyeParams::default()
        })
        .unwrap();
        let out = geometric_calibrate(&img, &CalibrationSpec::square(256), None).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn size_contract() {
        let img = RgbImage::filled(512, 512, [9, 9, 9]).unwrap();
        let out = geometric_calibrate(&img, &CalibrationSpec::square(256), None).unwrap();
        assert_eq!((out.width(), out.height()), (256, 256));
    }

    #[test]
    fn oversized_target_rejected() {
        let img = RgbImage::filled(64, 64, [9, 9, 9]).unwrap();
        assert!(matches!(
            geometric_calibrate(&img, &CalibrationSpec::square(257), None),
            Err(ImagingError::Calibration(_))
        ));
        assert!(geometric_calibrate(&img, &CalibrationSpec::square(256), None).is_ok());
    }
}
