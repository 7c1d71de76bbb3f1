use serde::{Deserialize, Serialize};

use super::distance::weighted_norm;
use super::MatchingError;

pub const WEIGHTS_FORMAT_VERSION: &str = "1";

/// Fusion weights and acceptance threshold; the GA's chromosome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchWeights {
    pub version: String,
    pub w_code: f64,
    pub w_geom: [f64; 5],
    pub w_cluster: f64,
    pub threshold: f64,
}

impl MatchWeights {
    pub fn new(w_code: f64, w_geom: [f64; 5], w_cluster: f64, threshold: f64) -> Self {
        MatchWeights {
            version: WEIGHTS_FORMAT_VERSION.into(),
            w_code,
            w_geom,
            w_cluster,
            threshold,
        }
    }

    /// Code distance only.
    pub fn code_only(threshold: f64) -> Self {
        MatchWeights::new(1.0, [0.0; 5], 0.0, threshold)
    }

    pub fn total(&self) -> f64 {
        self.w_code + self.w_geom.iter().sum::<f64>() + self.w_cluster
    }

    pub fn scaled(&self, factor: f64) -> Self {
        MatchWeights {
            w_code: self.w_code * factor,
            w_geom: self.w_geom.map(|w| w * factor),
            w_cluster: self.w_cluster * factor,
            ..self.clone()
        }
    }

    /// Scores one comparison: the geometric distance is formed from the
    /// per-field deltas under `w_geom` and then fused.
    pub fn score(&self, sample: &ComponentSample) -> Result<MatchScore, MatchingError> {
        let geom_d = weighted_norm(&sample.geom_delta, &self.w_geom);
        fuse(sample.code_distance, geom_d, sample.cluster_penalty, self)
    }
}

/// Precomputed comparison components. Geometric parameters are kept as
/// per-field absolute differences so the geometric distance can be
/// re-weighted without recomputing the comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentSample {
    pub code_distance: f64,
    pub geom_delta: [f64; 5],
    pub cluster_penalty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchScore {
    pub code_distance: f64,
    pub geom_distance: f64,
    pub cluster_penalty: f64,
    pub fused: f64,
    pub accepted: bool,
}

/// Weighted mean of the three components:
///
/// `(w_code*code + (sum w_geom)*geom + w_cluster*cluster) / (w_code + sum w_geom + w_cluster)`,
/// accepted iff strictly below the threshold.
pub fn fuse(code_d: f64, geom_d: f64, cluster_p: f64, w: &MatchWeights) -> Result<MatchScore, MatchingError> {
    let geom_total: f64 = w.w_geom.iter().sum();
    let total = w.w_code + geom_total + w.w_cluster;
    if !(total > 0.0) {
        return Err(MatchingError::Weight);
    }
    let fused = (w.w_code * code_d + geom_total * geom_d + w.w_cluster * cluster_p) / total;
    Ok(MatchScore {
        code_distance: code_d,
        geom_distance: geom_d,
        cluster_penalty: cluster_p,
        fused,
        accepted: fused < w.threshold,
    })
}

/// `(FAR, FRR)`: accepted impostors / impostors, rejected genuines / genuines.
pub fn evaluate_rates(
    weights: &MatchWeights,
    genuine: &[ComponentSample],
    impostor: &[ComponentSample],
) -> Result<(f64, f64), MatchingError> {
    if genuine.is_empty() {
        return Err(MatchingError::EmptySample("genuine"));
    }
    if impostor.is_empty() {
        return Err(MatchingError::EmptySample("impostor"));
    }
    let mut false_accepts = 0usize;
    for s in impostor {
        if weights.score(s)?.accepted {
            false_accepts += 1;
        }
    }
    let mut false_rejects = 0usize;
    for s in genuine {
        if !weights.score(s)?.accepted {
            false_rejects += 1;
        }
    }
    Ok((
        false_accepts as f64 / impostor.len() as f64,
        false_rejects as f64 / genuine.len() as f64,
    ))
}
