use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::GatewayError;
use crate::matching::{ga_tune_with_history, ComponentSample, GaConfig, GaReport, MatchWeights};
use crate::pipeline::{encode, EncodedEye, EyeAnalysis, PipelineConfig};
use crate::transform::{train_selector, SelectorModel, WaveletCoeffs};

pub const MODEL_FORMAT_VERSION: &str = "1";
/// Threshold of the untrained model: midway between typical genuine and
/// impostor code distances.
pub const UNTRAINED_THRESHOLD: f64 = 0.32;

/// Everything a verifier needs: how to normalize, which coefficients to
/// keep, and how to fuse and threshold scores. This is the weights file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedModel {
    pub version: String,
    pub pipeline: PipelineConfig,
    pub selector: SelectorModel,
    pub weights: MatchWeights,
}

impl TunedModel {
    /// All coefficients, code distance only; usable before any tuning.
    pub fn untrained(pipeline: PipelineConfig) -> Self {
        let selector = SelectorModel::keep_all(pipeline.angles, pipeline.radii, pipeline.levels);
        TunedModel {
            version: MODEL_FORMAT_VERSION.into(),
            pipeline,
            selector,
            weights: MatchWeights::code_only(UNTRAINED_THRESHOLD),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: String| Err(GatewayError::Model(m));
        if self.version != MODEL_FORMAT_VERSION {
            return bad(format!("unsupported model version {:?}", self.version));
        }
        self.selector.validate().map_err(|e| GatewayError::Model(e.to_string()))?;
        let p = &self.pipeline;
        if (p.angles, p.radii, p.levels) != (self.selector.angles, self.selector.radii, self.selector.levels) {
            return bad("selector shape differs from the pipeline grid".into());
        }
        p.weight_map.validate().map_err(|e| GatewayError::Model(e.to_string()))?;
        if (p.weight_map.angles, p.weight_map.radii) != (p.angles, p.radii) {
            return bad("weight map shape differs from the pipeline grid".into());
        }
        if !(self.weights.total() > 0.0) || !(self.weights.threshold > 0.0 && self.weights.threshold < 1.0) {
            return bad("fusion weights must have positive total and a threshold in (0, 1)".into());
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Model(format!("cannot read {}: {e}", path.display())))?;
        let model: TunedModel = serde_json::from_str(&text)
            .map_err(|e| GatewayError::Model(format!("{}: {e}", path.display())))?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GatewayError> {
        let text = serde_json::to_string_pretty(self).expect("model serializes");
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneConfig {
    pub pipeline: PipelineConfig,
    /// Coefficients kept by the selector.
    pub k: usize,
    pub ga: GaConfig,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            pipeline: PipelineConfig::default(),
            k: 256,
            ga: GaConfig::default(),
        }
    }
}

/// Analyses of one identity's captures.
#[derive(Debug, Clone)]
pub struct Identity {
    pub subject_id: String,
    pub analyses: Vec<EyeAnalysis>,
}

/// Genuine and impostor comparisons of every pair of encoded eyes.
#[derive(Debug, Clone, Default)]
pub struct PairSamples {
    pub genuine: Vec<ComponentSample>,
    pub impostor: Vec<ComponentSample>,
}

pub fn encode_identities(ids: &[Identity], selector: &SelectorModel) -> Result<Vec<Vec<EncodedEye>>, GatewayError> {
    ids.iter()
        .map(|id| {
            id.analyses
                .iter()
                .map(|a| encode(a, selector).map_err(|e| GatewayError::Model(e.to_string())))
                .collect()
        })
        .collect()
}

pub fn pair_samples(encoded: &[Vec<EncodedEye>]) -> Result<PairSamples, GatewayError> {
    let flat: Vec<(usize, &EncodedEye)> = encoded
        .iter()
        .enumerate()
        .flat_map(|(i, eyes)| eyes.iter().map(move |e| (i, e)))
        .collect();
    let rows: Vec<Vec<(bool, ComponentSample)>> = (0..flat.len())
        .into_par_iter()
        .map(|a| {
            (a + 1..flat.len())
                .map(|b| {
                    let s = flat[a].1.compare(flat[b].1).map_err(|e| GatewayError::Model(e.to_string()))?;
                    Ok((flat[a].0 == flat[b].0, s))
                })
                .collect::<Result<Vec<_>, GatewayError>>()
        })
        .collect::<Result<_, _>>()?;
    let mut out = PairSamples::default();
    for (genuine, s) in rows.into_iter().flatten() {
        if genuine {
            out.genuine.push(s);
        } else {
            out.impostor.push(s);
        }
    }
    Ok(out)
}

/// Selector training pairs: every within-identity pair, and for each pair
/// of identities `(a, b)` one cross pair using capture `(a + b) mod m`.
fn selector_pairs(ids: &[Identity]) -> (Vec<(WaveletCoeffs, WaveletCoeffs)>, Vec<(WaveletCoeffs, WaveletCoeffs)>) {
    let mut genuine = Vec::new();
    let mut impostor = Vec::new();
    for (a, ia) in ids.iter().enumerate() {
        for x in 0..ia.analyses.len() {
            for y in x + 1..ia.analyses.len() {
                genuine.push((ia.analyses[x].coefficients.clone(), ia.analyses[y].coefficients.clone()));
            }
        }
        for (b, ib) in ids.iter().enumerate().skip(a + 1) {
            let m = ia.analyses.len().min(ib.analyses.len());
            if m > 0 {
                let j = (a + b) % m;
                impostor.push((ia.analyses[j].coefficients.clone(), ib.analyses[j].coefficients.clone()));
            }
        }
    }
    (genuine, impostor)
}

/// Trains the selector on the identities, then tunes the fusion weights on
/// all pairwise comparisons of the re-encoded captures.
pub fn tune_model(ids: &[Identity], cfg: &TuneConfig) -> Result<(TunedModel, GaReport), GatewayError> {
    if ids.len() < 2 {
        return Err(GatewayError::Training("need at least two identities".into()));
    }
    let (genuine, impostor) = selector_pairs(ids);
    let selector = train_selector(&genuine, &impostor, cfg.k).map_err(|e| GatewayError::Training(e.to_string()))?;
    let encoded = encode_identities(ids, &selector)?;
    let samples = pair_samples(&encoded)?;
    let report = ga_tune_with_history(&samples.genuine, &samples.impostor, &cfg.ga)
        .map_err(|e| GatewayError::Training(e.to_string()))?;
    let model = TunedModel {
        version: MODEL_FORMAT_VERSION.into(),
        pipeline: cfg.pipeline.clone(),
        selector,
        weights: report.weights.clone(),
    };
    model.validate()?;
    Ok((model, report))
}
