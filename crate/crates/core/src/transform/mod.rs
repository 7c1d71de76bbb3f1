//! Polar normalization, the weighted surface, Haar wavelet analysis,
//! coefficient selection, binary encoding and tomography profiles.

mod code;
mod haar;
mod polar;
mod selector;
mod tomography;
mod weight;

pub use code::{encode_code, FeatureVector, IrisCode};
pub use haar::{haar_dwt2, haar_idwt2, haar_step, WaveletCoeffs};
pub use polar::{unwrap_polar, NormalizedIris};
pub use selector::{select_features, train_selector, SelectorModel, SELECTOR_FORMAT_VERSION};
pub use tomography::{tomography_profiles, TomographyProfile};
pub use weight::{apply_weight_surface, WeightMap};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid wavelet level {levels} for a {angles}x{radii} grid")]
    Level { levels: usize, angles: usize, radii: usize },
    #[error("geometry outside the image: {0}")]
    OutOfFrame(String),
    #[error("insufficient training data: {0}")]
    TrainingData(String),
    #[error("selector model does not fit the coefficients: {0}")]
    ModelMismatch(String),
    #[error("angle index {index} out of range for {angles} angles")]
    Index { index: usize, angles: usize },
}

pub(crate) fn check_dims(angles: usize, radii: usize) -> Result<(), TransformError> {
    if !angles.is_power_of_two() || !radii.is_power_of_two() || angles < 2 || radii < 2 {
        return Err(TransformError::Shape(format!(
            "grid {angles}x{radii} must have power-of-two sides >= 2"
        )));
    }
    Ok(())
}
