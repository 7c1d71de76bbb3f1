//! Pupil and iris boundary localisation, sclera redness and the
//! morphology checks run on every captured eye.

mod morphology;
mod search;

pub use morphology::{morphology_check, sclera_redness, MorphologyCheck, MorphologyReport};
pub use search::{find_iris, find_pupil, CONTRAST_FLOOR, SMOOTHING_SIGMA};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{photometric_align, split_rgb, RgbImage};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegmentationError {
    #[error("no boundary found: {0}")]
    NoBoundary(String),
    #[error("invalid geometry: {0}")]
    Geometry(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Circle {
    pub fn new(cx: f64, cy: f64, r: f64) -> Self {
        Circle { cx, cy, r }
    }

    pub fn center_distance(&self, other: &Circle) -> f64 {
        (self.cx - other.cx).hypot(self.cy - other.cy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EyeGeometry {
    pub pupil: Circle,
    pub iris: Circle,
}

impl EyeGeometry {
    pub fn concentricity(&self) -> f64 {
        self.pupil.center_distance(&self.iris)
    }

    pub fn radius_ratio(&self) -> f64 {
        self.pupil.r / self.iris.r
    }

    pub fn is_contained(&self) -> bool {
        self.concentricity() + self.pupil.r <= self.iris.r
    }

    /// Containment and `0.1 <= pupil.r / iris.r <= 0.8`.
    pub fn validate(&self) -> Result<(), SegmentationError> {
        if !(self.pupil.r > 0.0 && self.iris.r > 0.0) {
            return Err(SegmentationError::Geometry("radii must be positive".into()));
        }
        if !self.is_contained() {
            return Err(SegmentationError::Geometry("pupil not inside iris".into()));
        }
        let ratio = self.radius_ratio();
        if !(0.1..=0.8).contains(&ratio) {
            return Err(SegmentationError::Geometry(format!("radius ratio {ratio:.3} outside [0.1, 0.8]")));
        }
        Ok(())
    }
}

/// Full localisation on a colour capture: the red plane (unaffected by
/// sclera congestion) is photometrically aligned, then searched for the
/// pupil and the iris.
pub fn segment_eye(img: &RgbImage) -> Result<EyeGeometry, SegmentationError> {
    let (red, _, _) = split_rgb(img);
    let gray = photometric_align(&red);
    let pupil = find_pupil(&gray)?;
    let iris = find_iris(&gray, &pupil)?;
    Ok(EyeGeometry { pupil, iris })
}
