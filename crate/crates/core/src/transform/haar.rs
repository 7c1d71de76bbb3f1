//! Separable orthonormal Haar analysis on power-of-two grids.
//!
//! Layout is the standard dyadic pyramid. Each level transforms the current
//! top-left block first along the radius axis and then along the angle axis,
//! writing lows to the first half and highs to the second half of each line.
//! After `L` levels the approximation occupies the top-left
//! `(A >> L) x (R >> L)` block.

use std::f64::consts::FRAC_1_SQRT_2;

use super::{NormalizedIris, TransformError};

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoeffs {
    pub angles: usize,
    pub radii: usize,
    pub levels: usize,
    pub coefficients: Vec<f64>,
}

impl WaveletCoeffs {
    pub fn max_levels(angles: usize, radii: usize) -> usize {
        angles.min(radii).trailing_zeros() as usize
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Flat indices of the deepest approximation block.
    pub fn approximation_positions(&self) -> impl Iterator<Item = usize> + '_ {
        let rows = self.angles >> self.levels;
        let cols = self.radii >> self.levels;
        (0..rows).flat_map(move |a| (0..cols).map(move |r| a * self.radii + r))
    }

    /// Removes the grid mean (the DC term), which lives entirely in the
    /// approximation block: its coefficients are shifted to zero mean.
    pub fn without_dc(&self) -> WaveletCoeffs {
        let positions: Vec<usize> = self.approximation_positions().collect();
        let mean = positions.iter().map(|&p| self.coefficients[p]).sum::<f64>() / positions.len() as f64;
        let mut out = self.clone();
        for p in positions {
            out.coefficients[p] -= mean;
        }
        out
    }

    fn check(&self) -> Result<(), TransformError> {
        super::check_dims(self.angles, self.radii)?;
        if self.levels > Self::max_levels(self.angles, self.radii) {
            return Err(TransformError::Level {
                levels: self.levels,
                angles: self.angles,
                radii: self.radii,
            });
        }
        if self.coefficients.len() != self.angles * self.radii {
            return Err(TransformError::Shape(format!(
                "{} coefficients for a {}x{} layout",
                self.coefficients.len(),
                self.angles,
                self.radii
            )));
        }
        Ok(())
    }
}

/// One analysis step on a pair: `((a + b)/sqrt 2, (a - b)/sqrt 2)`.
#[inline]
pub fn haar_step(a: f64, b: f64) -> (f64, f64) {
    ((a + b) * FRAC_1_SQRT_2, (a - b) * FRAC_1_SQRT_2)
}

fn analyze_line(buf: &mut [f64], scratch: &mut Vec<f64>) {
    let half = buf.len() / 2;
    scratch.clear();
    scratch.resize(buf.len(), 0.0);
    for i in 0..half {
        let (lo, hi) = haar_step(buf[2 * i], buf[2 * i + 1]);
        scratch[i] = lo;
        scratch[half + i] = hi;
    }
    buf.copy_from_slice(scratch);
}

fn synthesize_line(buf: &mut [f64], scratch: &mut Vec<f64>) {
    let half = buf.len() / 2;
    scratch.clear();
    scratch.resize(buf.len(), 0.0);
    for i in 0..half {
        let (lo, hi) = (buf[i], buf[half + i]);
        scratch[2 * i] = (lo + hi) * FRAC_1_SQRT_2;
        scratch[2 * i + 1] = (lo - hi) * FRAC_1_SQRT_2;
    }
    buf.copy_from_slice(scratch);
}

fn for_each_column(data: &mut [f64], stride: usize, rows: usize, cols: usize, f: impl Fn(&mut [f64], &mut Vec<f64>)) {
    let mut column = vec![0.0; rows];
    let mut scratch = Vec::with_capacity(rows);
    for c in 0..cols {
        for r in 0..rows {
            column[r] = data[r * stride + c];
        }
        f(&mut column, &mut scratch);
        for r in 0..rows {
            data[r * stride + c] = column[r];
        }
    }
}

pub fn haar_dwt2(n: &NormalizedIris, levels: usize) -> Result<WaveletCoeffs, TransformError> {
    let mut out = WaveletCoeffs {
        angles: n.angles,
        radii: n.radii,
        levels,
        coefficients: n.grid.clone(),
    };
    out.check()?;
    let stride = n.radii;
    let mut scratch = Vec::with_capacity(stride.max(n.angles));
    for level in 0..levels {
        let rows = n.angles >> level;
        let cols = n.radii >> level;
        for r in 0..rows {
            analyze_line(&mut out.coefficients[r * stride..r * stride + cols], &mut scratch);
        }
        for_each_column(&mut out.coefficients, stride, rows, cols, analyze_line);
    }
    Ok(out)
}

pub fn haar_idwt2(c: &WaveletCoeffs) -> Result<NormalizedIris, TransformError> {
    c.check()?;
    let stride = c.radii;
    let mut data = c.coefficients.clone();
    let mut scratch = Vec::with_capacity(stride.max(c.angles));
    for level in (0..c.levels).rev() {
        let rows = c.angles >> level;
        let cols = c.radii >> level;
        for_each_column(&mut data, stride, rows, cols, synthesize_line);
        for r in 0..rows {
            synthesize_line(&mut data[r * stride..r * stride + cols], &mut scratch);
        }
    }
    NormalizedIris::new(c.angles, c.radii, data)
}
