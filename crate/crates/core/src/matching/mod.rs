//! The recognition space: code distance, geometric-parameter distance and
//! the spatial-cluster penalty, fused under GA-tuned weights.

mod distance;
mod fusion;
mod ga;

pub use distance::{cluster_penalty, geometric_distance, hamming_distance, GeomParams, GEOM_FIELDS};
pub use fusion::{evaluate_rates, fuse, ComponentSample, MatchScore, MatchWeights, WEIGHTS_FORMAT_VERSION};
pub use ga::{ga_tune, ga_tune_with_history, Chromosome, GaConfig, GaReport, GenerationStats};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchingError {
    #[error("code lengths differ: {0} vs {1}")]
    CodeLength(usize, usize),
    #[error("all fusion weights are zero")]
    Weight,
    #[error("insufficient training data: {0}")]
    TrainingData(String),
    #[error("empty sample list: {0}")]
    EmptySample(&'static str),
    #[error("invalid GA configuration: {0}")]
    Config(String),
}
