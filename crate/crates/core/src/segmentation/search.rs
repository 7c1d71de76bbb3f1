//! Integro-differential circle search.
//!
//! For a center `c` and radius `r` the criterion is the Gaussian-smoothed
//! radial derivative of the mean intensity on the circle of radius `r`:
//!
//! ```text
//! score(c, r) = sum_k g_k * (M(c, r+k+1) - M(c, r+k-1)) / 2,   k = -6..=6
//! ```
//!
//! with `g` a normalized Gaussian of sigma 2 px and `M` the bilinear mean
//! over 128 equally spaced points. A circle (and its smoothing support) must
//! lie inside the frame. The maximum wins; ties go to the smaller radius,
//! then to the smaller `(cy, cx)`.
//!
//! The pupil search scans a coarse center lattice (stride 6, 32 points per
//! circle) and then every integer center within 3 px of the three best
//! coarse centers with the full criterion. The iris search evaluates every
//! admissible integer center directly.

use super::{Circle, SegmentationError};
use crate::imaging::GrayImage;

pub const SMOOTHING_SIGMA: f64 = 2.0;
/// Minimum criterion value accepted as a boundary, in intensity units.
pub const CONTRAST_FLOOR: f64 = 8.0;

const KERNEL_HALF: usize = 6;
const REACH: usize = KERNEL_HALF + 1;
const FINE_POINTS: usize = 128;
const COARSE_POINTS: usize = 32;
const COARSE_STRIDE: usize = 6;
const COARSE_KEEP: usize = 3;
const REFINE_RADIUS: isize = 3;

struct Ring {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Ring {
    fn new(points: usize) -> Self {
        let angles = (0..points).map(|j| std::f64::consts::TAU * j as f64 / points as f64);
        Ring {
            cos: angles.clone().map(f64::cos).collect(),
            sin: angles.map(f64::sin).collect(),
        }
    }
}

struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    fn new(gray: &GrayImage) -> Self {
        Plane {
            width: gray.width(),
            height: gray.height(),
            data: gray.as_bytes().iter().map(|&v| v as f64).collect(),
        }
    }

    #[inline]
    fn sample(&self, x: f64, y: f64) -> f64 {
        // callers keep (x, y) inside [0, w-1] x [0, h-1]
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let row0 = y0 * self.width;
        let row1 = y1 * self.width;
        let top = self.data[row0 + x0] + (self.data[row0 + x1] - self.data[row0 + x0]) * fx;
        let bottom = self.data[row1 + x0] + (self.data[row1 + x1] - self.data[row1 + x0]) * fx;
        top + (bottom - top) * fy
    }

    fn circle_mean(&self, ring: &Ring, cx: f64, cy: f64, r: f64) -> f64 {
        let sum: f64 = ring
            .cos
            .iter()
            .zip(&ring.sin)
            .map(|(c, s)| self.sample(cx + r * c, cy + r * s))
            .sum();
        sum / ring.cos.len() as f64
    }
}

fn gaussian_kernel() -> [f64; 2 * KERNEL_HALF + 1] {
    let mut k = [0.0; 2 * KERNEL_HALF + 1];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - KERNEL_HALF as f64;
        *v = (-d * d / (2.0 * SMOOTHING_SIGMA * SMOOTHING_SIGMA)).exp();
    }
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    score: f64,
    r: usize,
    cx: usize,
    cy: usize,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        self.score > other.score
            || (self.score == other.score && (self.r, self.cy, self.cx) < (other.r, other.cy, other.cx))
    }
}

fn keep_best(best: &mut Option<Candidate>, c: Candidate) {
    if best.as_ref().is_none_or(|b| c.beats(b)) {
        *best = Some(c);
    }
}

struct Searcher {
    plane: Plane,
    kernel: [f64; 2 * KERNEL_HALF + 1],
}

impl Searcher {
    fn new(gray: &GrayImage) -> Self {
        Searcher {
            plane: Plane::new(gray),
            kernel: gaussian_kernel(),
        }
    }

    /// Best radius in `r_lo..=r_hi` for one center, honouring the frame.
    fn best_at(&self, ring: &Ring, cx: usize, cy: usize, r_lo: usize, r_hi: usize) -> Option<Candidate> {
        let border = cx
            .min(cy)
            .min(self.plane.width - 1 - cx)
            .min(self.plane.height - 1 - cy);
        if border < REACH {
            return None;
        }
        let r_lo = r_lo.max(REACH);
        let r_hi = r_hi.min(border - REACH);
        if r_lo > r_hi {
            return None;
        }
        let first = r_lo - REACH;
        let means: Vec<f64> = (first..=r_hi + REACH)
            .map(|s| self.plane.circle_mean(ring, cx as f64, cy as f64, s as f64))
            .collect();
        let at = |s: usize| means[s - first];
        let mut best = None;
        for r in r_lo..=r_hi {
            let score: f64 = self
                .kernel
                .iter()
                .enumerate()
                .map(|(i, g)| {
                    let s = r + i - KERNEL_HALF;
                    g * (at(s + 1) - at(s - 1)) / 2.0
                })
                .sum();
            keep_best(&mut best, Candidate { score, r, cx, cy });
        }
        best
    }
}

fn finish(best: Option<Candidate>, what: &str) -> Result<Circle, SegmentationError> {
    match best {
        Some(c) if c.score >= CONTRAST_FLOOR => Ok(Circle::new(c.cx as f64, c.cy as f64, c.r as f64)),
        Some(c) => Err(SegmentationError::NoBoundary(format!(
            "{what} contrast {:.2} below floor {CONTRAST_FLOOR}",
            c.score
        ))),
        None => Err(SegmentationError::NoBoundary(format!("{what} search space is empty"))),
    }
}

/// Locates the pupil boundary on a photometrically aligned plane.
pub fn find_pupil(gray: &GrayImage) -> Result<Circle, SegmentationError> {
    let (w, h) = (gray.width(), gray.height());
    let short = w.min(h) as f64;
    let r_lo = (0.05 * short).ceil() as usize;
    let r_hi = (0.45 * short).floor() as usize;
    let searcher = Searcher::new(gray);

    let coarse_ring = Ring::new(COARSE_POINTS);
    let offset = COARSE_STRIDE / 2;
    let mut coarse: Vec<Candidate> = Vec::new();
    for cy in (offset..h).step_by(COARSE_STRIDE) {
        for cx in (offset..w).step_by(COARSE_STRIDE) {
            if let Some(c) = searcher.best_at(&coarse_ring, cx, cy, r_lo, r_hi) {
                coarse.push(c);
            }
        }
    }
    coarse.sort_by(|a, b| {
        if a.beats(b) {
            std::cmp::Ordering::Less
        } else if b.beats(a) {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });

    let mut visited = vec![false; w * h];
    let fine_ring = Ring::new(FINE_POINTS);
    let mut best = None;
    for seed in coarse.iter().take(COARSE_KEEP) {
        for dy in -REFINE_RADIUS..=REFINE_RADIUS {
            for dx in -REFINE_RADIUS..=REFINE_RADIUS {
                let (x, y) = (seed.cx as isize + dx, seed.cy as isize + dy);
                if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
                    continue;
                }
                let (x, y) = (x as usize, y as usize);
                if std::mem::replace(&mut visited[y * w + x], true) {
                    continue;
                }
                if let Some(c) = searcher.best_at(&fine_ring, x, y, r_lo, r_hi) {
                    keep_best(&mut best, c);
                }
            }
        }
    }
    finish(best, "pupil")
}

/// Locates the iris boundary: centers within 5 px of the pupil center,
/// radii strictly between `1.25 * pupil.r` and `0.48 * min(w, h)`.
pub fn find_iris(gray: &GrayImage, pupil: &Circle) -> Result<Circle, SegmentationError> {
    let (w, h) = (gray.width(), gray.height());
    let r_lo = (1.25 * pupil.r).floor() as usize + 1;
    let r_hi = ((0.48 * w.min(h) as f64).ceil() as usize).saturating_sub(1);
    if r_lo > r_hi {
        return Err(SegmentationError::NoBoundary(format!(
            "iris search space empty for pupil radius {}",
            pupil.r
        )));
    }
    let searcher = Searcher::new(gray);
    let ring = Ring::new(FINE_POINTS);
    let mut best = None;
    let y_lo = (pupil.cy - 5.0).ceil().max(0.0) as usize;
    let y_hi = ((pupil.cy + 5.0).floor() as usize).min(h - 1);
    let x_lo = (pupil.cx - 5.0).ceil().max(0.0) as usize;
    let x_hi = ((pupil.cx + 5.0).floor() as usize).min(w - 1);
    for cy in y_lo..=y_hi {
        for cx in x_lo..=x_hi {
            if (cx as f64 - pupil.cx).hypot(cy as f64 - pupil.cy) > 5.0 {
                continue;
            }
            if let Some(c) = searcher.best_at(&ring, cx, cy, r_lo, r_hi) {
                keep_best(&mut best, c);
            }
        }
    }
    finish(best, "iris")
}
