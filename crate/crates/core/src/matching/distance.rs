use serde::{Deserialize, Serialize};

use super::MatchingError;
use crate::transform::IrisCode;

pub const GEOM_FIELDS: [&str; 5] = [
    "radius_ratio",
    "concentricity_norm",
    "sclera_redness",
    "mean_intensity",
    "profile_curvature",
];

/// Principal iris/pupil parameters spanning the geometric part of the
/// recognition space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeomParams {
    pub radius_ratio: f64,
    pub concentricity_norm: f64,
    pub sclera_redness: f64,
    pub mean_intensity: f64,
    pub profile_curvature: f64,
}

impl GeomParams {
    /// Fields in [`GEOM_FIELDS`] order.
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.radius_ratio,
            self.concentricity_norm,
            self.sclera_redness,
            self.mean_intensity,
            self.profile_curvature,
        ]
    }

    pub fn abs_delta(&self, other: &GeomParams) -> [f64; 5] {
        let (a, b) = (self.as_array(), other.as_array());
        std::array::from_fn(|i| (a[i] - b[i]).abs())
    }

    pub fn is_valid(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite()) && self.radius_ratio > 0.0 && self.radius_ratio < 1.0
    }
}

fn same_len(a: &IrisCode, b: &IrisCode) -> Result<(), MatchingError> {
    if a.len() != b.len() || a.mask.len() != a.len() || b.mask.len() != b.len() {
        return Err(MatchingError::CodeLength(a.len(), b.len()));
    }
    Ok(())
}

/// Fraction of jointly valid positions whose bits differ; 0.5 when no
/// position is jointly valid.
pub fn hamming_distance(a: &IrisCode, b: &IrisCode) -> Result<f64, MatchingError> {
    same_len(a, b)?;
    let mut valid = 0usize;
    let mut differing = 0usize;
    for i in 0..a.len() {
        if a.mask[i] && b.mask[i] {
            valid += 1;
            if a.bits[i] != b.bits[i] {
                differing += 1;
            }
        }
    }
    Ok(if valid == 0 {
        0.5
    } else {
        differing as f64 / valid as f64
    })
}

/// Largest run of differing bits at consecutive coefficient positions
/// (`p`, `p + 1`, ...) divided by the number of differing bits. Only
/// jointly valid bits count; no differing bit gives 0.
pub fn cluster_penalty(a: &IrisCode, b: &IrisCode, positions: &[usize]) -> Result<f64, MatchingError> {
    same_len(a, b)?;
    if positions.len() != a.len() {
        return Err(MatchingError::CodeLength(a.len(), positions.len()));
    }
    let mut total = 0usize;
    let mut longest = 0usize;
    let mut run = 0usize;
    let mut last: Option<usize> = None;
    for i in 0..a.len() {
        let differs = a.mask[i] && b.mask[i] && a.bits[i] != b.bits[i];
        if !differs {
            continue;
        }
        total += 1;
        let p = positions[i];
        run = match last {
            Some(prev) if prev + 1 == p => run + 1,
            _ => 1,
        };
        longest = longest.max(run);
        last = Some(p);
    }
    Ok(if total == 0 {
        0.0
    } else {
        longest as f64 / total as f64
    })
}

/// `sqrt(sum_f w_f * (a_f - b_f)^2)`.
pub fn geometric_distance(a: &GeomParams, b: &GeomParams, w_geom: &[f64; 5]) -> f64 {
    weighted_norm(&a.abs_delta(b), w_geom)
}

pub(crate) fn weighted_norm(delta: &[f64; 5], w_geom: &[f64; 5]) -> f64 {
    delta.iter().zip(w_geom).map(|(d, w)| w * d * d).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_code(rng: &mut ChaCha8Rng, k: usize) -> IrisCode {
        IrisCode::full_mask((0..k).map(|_| rng.random()).collect())
    }

    fn geom() -> GeomParams {
        GeomParams {
            radius_ratio: 0.3,
            concentricity_norm: 0.01,
            sclera_redness: 0.34,
            mean_intensity: 0.6,
            profile_curvature: 0.02,
        }
    }

    #[test]
    fn hamming_basics() {
        let a = IrisCode::full_mask(vec![true, false, true, true]);
        let c = IrisCode::full_mask(vec![false, true, false, false]);
        assert_eq!(hamming_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(hamming_distance(&a, &c).unwrap(), 1.0);
        let masked = IrisCode {
            bits: a.bits.clone(),
            mask: vec![false; 4],
        };
        assert_eq!(hamming_distance(&a, &masked).unwrap(), 0.5);
        let short = IrisCode::full_mask(vec![true]);
        assert_eq!(hamming_distance(&a, &short), Err(MatchingError::CodeLength(4, 1)));
    }

    #[test]
    fn random_codes_average_one_half() {
        // Monte Carlo oracle: fixed seed, 10_000 independent pairs
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let trials = 10_000;
        let mean = (0..trials)
            .map(|_| {
                let a = random_code(&mut rng, 256);
                let b = random_code(&mut rng, 256);
                hamming_distance(&a, &b).unwrap()
            })
            .sum::<f64>()
            / trials as f64;
        assert!((0.49..=0.51).contains(&mean), "mean {mean}");
    }

    #[test]
    fn cluster_rules() {
        let positions: Vec<usize> = (0..8).map(|i| i * 2).collect();
        let a = IrisCode::full_mask(vec![false; 8]);
        assert_eq!(cluster_penalty(&a, &a, &positions).unwrap(), 0.0);

        let contiguous: Vec<usize> = (10..18).collect();
        let mut bits = vec![false; 8];
        bits[2..6].iter_mut().for_each(|b| *b = true);
        let b = IrisCode::full_mask(bits);
        assert_eq!(cluster_penalty(&a, &b, &contiguous).unwrap(), 1.0);

        // same bits, but positions two apart: every differing bit is isolated
        assert_eq!(cluster_penalty(&a, &b, &positions).unwrap(), 0.25);
        assert!(cluster_penalty(&a, &b, &positions[..3]).is_err());
    }

    #[test]
    fn geometric_distance_rules() {
        let a = geom();
        assert_eq!(geometric_distance(&a, &a, &[1.0; 5]), 0.0);
        let mut b = a;
        b.mean_intensity += 0.2;
        b.radius_ratio -= 0.1;
        assert_eq!(geometric_distance(&a, &b, &[0.0; 5]), 0.0);
        let mut c = a;
        c.sclera_redness += 0.3;
        let w = [0.0, 0.0, 0.49, 0.0, 0.0];
        assert!((geometric_distance(&a, &c, &w) - 0.7 * 0.3).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn hamming_is_a_metric(seed in any::<u64>(), k in 1usize..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_code(&mut rng, k);
            let b = random_code(&mut rng, k);
            let c = random_code(&mut rng, k);
            let d = |x: &IrisCode, y: &IrisCode| hamming_distance(x, y).unwrap();
            prop_assert_eq!(d(&a, &a), 0.0);
            prop_assert_eq!(d(&a, &b), d(&b, &a));
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        }
    }
}
