//! Raster types, the synthetic eye generator and pre-reduction
//! (geometric calibration and photometric alignment).

mod calibrate;
mod image;
pub mod ppm;
mod synth;

pub use calibrate::{geometric_calibrate, CalibrationSpec};
pub use image::{photometric_align, recombine, split_rgb, GrayImage, RgbImage, MIN_RGB_DIM};
pub use synth::{generate_synthetic_eye, EyeParams, IrisTexture, IRIS_BASE_RED, PUPIL_LEVEL, SCLERA_RED};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("invalid image dimensions {width}x{height}: {reason}")]
    Dimensions {
        width: usize,
        height: usize,
        reason: &'static str,
    },
    #[error("invalid eye geometry: {0}")]
    Geometry(String),
    #[error("calibration error: {0}")]
    Calibration(String),
    #[error("malformed PNM data: {0}")]
    Pnm(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
