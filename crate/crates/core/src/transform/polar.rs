use std::f64::consts::TAU;

use super::{check_dims, TransformError};
use crate::imaging::GrayImage;
use crate::segmentation::EyeGeometry;

/// The iris annulus resampled on an angle x normalized-radius grid.
/// Row `a` holds angle `2*pi*a/angles`; values lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedIris {
    pub angles: usize,
    pub radii: usize,
    pub grid: Vec<f64>,
}

impl NormalizedIris {
    pub fn new(angles: usize, radii: usize, grid: Vec<f64>) -> Result<Self, TransformError> {
        check_dims(angles, radii)?;
        if grid.len() != angles * radii {
            return Err(TransformError::Shape(format!(
                "grid has {} values, expected {}",
                grid.len(),
                angles * radii
            )));
        }
        Ok(NormalizedIris { angles, radii, grid })
    }

    pub fn constant(angles: usize, radii: usize, value: f64) -> Result<Self, TransformError> {
        NormalizedIris::new(angles, radii, vec![value; angles * radii])
    }

    #[inline]
    pub fn at(&self, angle: usize, radius: usize) -> f64 {
        self.grid[angle * self.radii + radius]
    }

    pub fn row(&self, angle: usize) -> &[f64] {
        &self.grid[angle * self.radii..(angle + 1) * self.radii]
    }

    pub fn mean(&self) -> f64 {
        self.grid.iter().sum::<f64>() / self.grid.len() as f64
    }

    /// 8-bit rendering (radius along x, angle along y) for inspection.
    pub fn to_gray(&self) -> GrayImage {
        let data = self
            .grid
            .iter()
            .map(|v| (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8)
            .collect();
        GrayImage::new(self.radii, self.angles, data).expect("dimensions checked at construction")
    }
}

/// Rubber-sheet unwrap: sample `(a, r)` blends the pupil-boundary and
/// iris-boundary points along angle `2*pi*a/A` at fraction `(r + 0.5)/R`.
pub fn unwrap_polar(
    gray: &GrayImage,
    geom: &EyeGeometry,
    angles: usize,
    radii: usize,
) -> Result<NormalizedIris, TransformError> {
    check_dims(angles, radii)?;
    let iris = &geom.iris;
    let pupil = &geom.pupil;
    let max_x = (gray.width() - 1) as f64;
    let max_y = (gray.height() - 1) as f64;
    for c in [iris, pupil] {
        if c.cx - c.r < 0.0 || c.cy - c.r < 0.0 || c.cx + c.r > max_x || c.cy + c.r > max_y {
            return Err(TransformError::OutOfFrame(format!(
                "circle ({:.1}, {:.1}, r {:.1}) leaves the {}x{} frame",
                c.cx,
                c.cy,
                c.r,
                gray.width(),
                gray.height()
            )));
        }
    }
    let mut grid = Vec::with_capacity(angles * radii);
    for a in 0..angles {
        let theta = TAU * a as f64 / angles as f64;
        let (sin, cos) = theta.sin_cos();
        let inner = (pupil.cx + pupil.r * cos, pupil.cy + pupil.r * sin);
        let outer = (iris.cx + iris.r * cos, iris.cy + iris.r * sin);
        for r in 0..radii {
            let rho = (r as f64 + 0.5) / radii as f64;
            let x = inner.0 + (outer.0 - inner.0) * rho;
            let y = inner.1 + (outer.1 - inner.1) * rho;
            grid.push(gray.sample(x, y) / 255.0);
        }
    }
    NormalizedIris::new(angles, radii, grid)
}
