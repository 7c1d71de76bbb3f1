//! Capture-to-template pipeline: segment, check morphology, unwrap, weight,
//! wavelet-analyse, select and encode.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{photometric_align, split_rgb, RgbImage};
use crate::matching::{cluster_penalty, hamming_distance, ComponentSample, GeomParams, MatchingError};
use crate::segmentation::{find_iris, find_pupil, morphology_check, EyeGeometry, MorphologyReport, SegmentationError};
use crate::transform::{
    apply_weight_surface, encode_code, haar_dwt2, select_features, tomography_profiles, unwrap_polar, FeatureVector,
    IrisCode, NormalizedIris, SelectorModel, TransformError, WaveletCoeffs, WeightMap,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("segmentation failed: {0}")]
    Segmentation(#[from] SegmentationError),
    #[error("morphology check failed: {}", failed_checks(.0))]
    Morphology(Box<MorphologyReport>),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

fn failed_checks(r: &MorphologyReport) -> String {
    r.failures.iter().map(|f| f.name()).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub angles: usize,
    pub radii: usize,
    pub levels: usize,
    pub weight_map: WeightMap,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            angles: 64,
            radii: 32,
            levels: 3,
            weight_map: WeightMap::uniform(64, 32),
        }
    }
}

/// Everything derived from one capture before coefficient selection.
#[derive(Debug, Clone)]
pub struct EyeAnalysis {
    pub geometry: EyeGeometry,
    pub morphology: MorphologyReport,
    pub normalized: NormalizedIris,
    /// Haar coefficients of the weighted surface, grid mean removed.
    pub coefficients: WaveletCoeffs,
    pub geom: GeomParams,
}

/// A capture reduced to matchable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedEye {
    pub code: IrisCode,
    pub positions: Vec<usize>,
    pub geom: GeomParams,
}

impl EncodedEye {
    pub fn compare(&self, other: &EncodedEye) -> Result<ComponentSample, MatchingError> {
        compare_parts(&self.code, &self.geom, &other.code, &other.geom, &self.positions)
    }
}

pub fn compare_parts(
    a_code: &IrisCode,
    a_geom: &GeomParams,
    b_code: &IrisCode,
    b_geom: &GeomParams,
    positions: &[usize],
) -> Result<ComponentSample, MatchingError> {
    Ok(ComponentSample {
        code_distance: hamming_distance(a_code, b_code)?,
        geom_delta: a_geom.abs_delta(b_geom),
        cluster_penalty: cluster_penalty(a_code, b_code, positions)?,
    })
}

/// Segmentation only: red plane, photometric alignment, pupil then iris.
pub fn locate(img: &RgbImage) -> Result<EyeGeometry, SegmentationError> {
    crate::segmentation::segment_eye(img)
}

pub fn analyze(img: &RgbImage, cfg: &PipelineConfig) -> Result<EyeAnalysis, PipelineError> {
    let (red, _, _) = split_rgb(img);
    let gray = photometric_align(&red);
    let pupil = find_pupil(&gray)?;
    let iris = find_iris(&gray, &pupil)?;
    let geometry = EyeGeometry { pupil, iris };
    analyze_located(img, &gray, geometry, cfg)
}

/// Pipeline tail for an already located eye; `gray` is the aligned plane.
pub fn analyze_located(
    img: &RgbImage,
    gray: &crate::imaging::GrayImage,
    geometry: EyeGeometry,
    cfg: &PipelineConfig,
) -> Result<EyeAnalysis, PipelineError> {
    let morphology = morphology_check(img, &geometry);
    if !morphology.passed {
        return Err(PipelineError::Morphology(Box::new(morphology)));
    }
    let normalized = unwrap_polar(gray, &geometry, cfg.angles, cfg.radii)?;
    let surface = apply_weight_surface(&normalized, &cfg.weight_map)?;
    let coefficients = haar_dwt2(&surface, cfg.levels)?.without_dc();
    let all_angles: Vec<usize> = (0..cfg.angles).collect();
    let profiles = tomography_profiles(&normalized, &all_angles)?;
    let geom = GeomParams {
        radius_ratio: geometry.radius_ratio(),
        concentricity_norm: geometry.concentricity() / geometry.iris.r,
        sclera_redness: morphology.sclera_redness,
        mean_intensity: normalized.mean(),
        profile_curvature: profiles.mean_curvature(),
    };
    Ok(EyeAnalysis {
        geometry,
        morphology,
        normalized,
        coefficients,
        geom,
    })
}

pub fn encode(analysis: &EyeAnalysis, selector: &SelectorModel) -> Result<EncodedEye, TransformError> {
    let FeatureVector { positions, values } = select_features(&analysis.coefficients, selector)?;
    let code = encode_code(&FeatureVector {
        positions: positions.clone(),
        values,
    });
    Ok(EncodedEye {
        code,
        positions,
        geom: analysis.geom,
    })
}
