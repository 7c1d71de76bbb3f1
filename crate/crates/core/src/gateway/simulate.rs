use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{encode_identities, pair_samples, Identity};
use super::GatewayError;
use crate::imaging::{generate_synthetic_eye, ppm, EyeParams, RgbImage};
use crate::pipeline::{analyze, PipelineConfig};
use crate::transform::SelectorModel;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ROC_FILE: &str = "roc.csv";
const ROC_STEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub identities: usize,
    pub images_per_identity: usize,
    pub seed: u64,
    pub image_size: usize,
    pub noise_sigma: f64,
    pub dilation: [f64; 2],
    pub redness: [f64; 2],
    pub illumination_gain: [f64; 2],
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            identities: 50,
            images_per_identity: 10,
            seed: 7,
            image_size: 256,
            noise_sigma: 4.0,
            dilation: [0.85, 1.3],
            redness: [0.0, 0.6],
            illumination_gain: [0.8, 1.2],
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        let ordered = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        if self.identities == 0 || self.images_per_identity == 0 {
            return Err(GatewayError::Invalid("population and images per identity must be >= 1".into()));
        }
        if self.image_size < 128 {
            return Err(GatewayError::Invalid("simulated frames must be at least 128 px".into()));
        }
        if !(ordered(self.dilation) && ordered(self.redness) && ordered(self.illumination_gain)) {
            return Err(GatewayError::Invalid("parameter ranges must be finite and ordered".into()));
        }
        if self.dilation[0] <= 0.0 || self.illumination_gain[0] <= 0.0 || self.redness[0] < 0.0 || self.redness[1] > 1.0 {
            return Err(GatewayError::Invalid("parameter ranges out of bounds".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusImage {
    pub subject_id: String,
    pub index: usize,
    /// Relative to the corpus directory.
    pub path: String,
    pub params: EyeParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: SimulationConfig,
    pub images: Vec<CorpusImage>,
}

pub fn subject_name(i: usize) -> String {
    format!("subject_{i:03}")
}

fn draw(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

/// Eye parameters for every capture. One ChaCha8 stream seeded with
/// `seed`; per identity it draws iris radius, pupil radius and texture
/// seed, then per capture center offset (x, y), dilation, redness, gain.
pub fn population_params(cfg: &SimulationConfig) -> Result<Vec<CorpusImage>, GatewayError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let size = cfg.image_size as f64;
    let mut out = Vec::with_capacity(cfg.identities * cfg.images_per_identity);
    for i in 0..cfg.identities {
        let iris_radius = rng.random_range(0.31 * size..0.39 * size);
        let pupil_radius = rng.random_range(0.1 * size..0.135 * size);
        let texture_seed = rng.random::<u64>();
        let subject_id = subject_name(i);
        for j in 0..cfg.images_per_identity {
            let offset = 0.025 * size;
            let center = [
                size / 2.0 + rng.random_range(-offset..offset),
                size / 2.0 + rng.random_range(-offset..offset),
            ];
            let params = EyeParams {
                image_size: cfg.image_size,
                center,
                pupil_radius,
                iris_radius,
                texture_seed,
                dilation: draw(&mut rng, cfg.dilation),
                redness: draw(&mut rng, cfg.redness),
                illumination_gain: draw(&mut rng, cfg.illumination_gain),
                noise_sigma: cfg.noise_sigma,
                texture_rotation: 0.0,
                capture_seed: j as u64,
            };
            params.validate()?;
            out.push(CorpusImage {
                path: format!("{subject_id}/img_{j:02}.ppm"),
                subject_id: subject_id.clone(),
                index: j,
                params,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

/// FAR/FRR of "accept iff distance < threshold" on a fixed threshold grid.
pub fn roc_curve(genuine: &[f64], impostor: &[f64]) -> Vec<RocPoint> {
    (0..=ROC_STEPS)
        .map(|s| {
            let t = s as f64 / ROC_STEPS as f64;
            let rate = |v: &[f64], accept: bool| {
                if v.is_empty() {
                    0.0
                } else {
                    v.iter().filter(|&&d| (d < t) == accept).count() as f64 / v.len() as f64
                }
            };
            RocPoint {
                threshold: t,
                far: rate(impostor, true),
                frr: rate(genuine, false),
            }
        })
        .collect()
}

pub fn roc_csv(points: &[RocPoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["threshold", "FAR", "FRR"]).expect("in-memory csv");
    for p in points {
        w.serialize((p.threshold, p.far, p.frr)).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub manifest: Manifest,
    /// Per identity, the captures that passed the pipeline.
    pub identities: Vec<Identity>,
    /// Captures rejected by segmentation or morphology.
    pub failed: Vec<String>,
    pub roc: Vec<RocPoint>,
}

/// Renders the population into `dir` (`subject_XXX/img_YY.ppm`, a
/// manifest, and an ROC of masked code distance over all coefficients)
/// and returns the analyses for reuse. Output bytes depend only on `cfg`.
pub fn simulate_corpus(dir: &Path, cfg: &SimulationConfig, pipeline: &PipelineConfig) -> Result<SimulationOutput, GatewayError> {
    let images = population_params(cfg)?;
    fs::create_dir_all(dir)?;
    for i in 0..cfg.identities {
        fs::create_dir_all(dir.join(subject_name(i)))?;
    }
    let analyses = images
        .par_iter()
        .map(|entry| {
            let img = generate_synthetic_eye(&entry.params)?;
            ppm::write_ppm(dir.join(&entry.path), &img)?;
            Ok(analyze(&img, pipeline).ok())
        })
        .collect::<Result<Vec<_>, GatewayError>>()?;

    let mut identities: Vec<Identity> = (0..cfg.identities)
        .map(|i| Identity {
            subject_id: subject_name(i),
            analyses: Vec::new(),
        })
        .collect();
    let mut failed = Vec::new();
    for (entry, analysis) in images.iter().zip(analyses) {
        match analysis {
            Some(a) => identities[entry.index_of_subject()].analyses.push(a),
            None => failed.push(entry.path.clone()),
        }
    }

    let selector = SelectorModel::keep_all(pipeline.angles, pipeline.radii, pipeline.levels);
    let samples = pair_samples(&encode_identities(&identities, &selector)?)?;
    let distances = |v: &[crate::matching::ComponentSample]| v.iter().map(|s| s.code_distance).collect::<Vec<_>>();
    let roc = roc_curve(&distances(&samples.genuine), &distances(&samples.impostor));

    let manifest = Manifest {
        version: "1".into(),
        config: cfg.clone(),
        images,
    };
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
    )?;
    fs::write(dir.join(ROC_FILE), roc_csv(&roc))?;
    Ok(SimulationOutput {
        manifest,
        identities,
        failed,
        roc,
    })
}

impl CorpusImage {
    fn index_of_subject(&self) -> usize {
        self.subject_id
            .strip_prefix("subject_")
            .and_then(|n| n.parse().ok())
            .expect("simulated subject names are numbered")
    }
}

/// Captures grouped by subject: `<dir>/<subject>/*.ppm`, both levels in
/// lexicographic order. Works for simulated and hand-assembled corpora.
pub fn load_corpus(dir: &Path) -> Result<Vec<(String, Vec<(PathBuf, RgbImage)>)>, GatewayError> {
    let mut subjects: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subjects.sort();
    let mut out = Vec::new();
    for s in subjects {
        let mut files: Vec<PathBuf> = fs::read_dir(&s)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "ppm"))
            .collect();
        files.sort();
        if files.is_empty() {
            continue;
        }
        let images = files
            .into_iter()
            .map(|p| ppm::read_ppm(&p).map(|img| (p, img)))
            .collect::<Result<Vec<_>, _>>()?;
        let name = s.file_name().unwrap_or_default().to_string_lossy().into_owned();
        out.push((name, images));
    }
    if out.is_empty() {
        return Err(GatewayError::Invalid(format!("no subject directories with .ppm files in {}", dir.display())));
    }
    Ok(out)
}

/// Runs the pipeline over a loaded corpus; failing captures are dropped.
pub fn analyze_corpus(
    corpus: &[(String, Vec<(PathBuf, RgbImage)>)],
    pipeline: &PipelineConfig,
) -> Vec<Identity> {
    corpus
        .iter()
        .map(|(subject_id, images)| Identity {
            subject_id: subject_id.clone(),
            analyses: images.par_iter().filter_map(|(_, img)| analyze(img, pipeline).ok()).collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_are_seeded() {
        let cfg = SimulationConfig {
            identities: 3,
            images_per_identity: 4,
            ..SimulationConfig::default()
        };
        let a = population_params(&cfg).unwrap();
        assert_eq!(a, population_params(&cfg).unwrap());
        let b = population_params(&SimulationConfig { seed: 8, ..cfg.clone() }).unwrap();
        assert_ne!(a, b);
        assert_eq!(a.len(), 12);
        assert_eq!(a[5].path, "subject_001/img_01.ppm");
        assert!(a.iter().all(|c| (0.85..1.3).contains(&c.params.dilation) && c.params.noise_sigma == 4.0));
        // identity traits are shared by all captures of one subject
        assert_eq!(a[4].params.texture_seed, a[7].params.texture_seed);
        assert_ne!(a[0].params.texture_seed, a[4].params.texture_seed);
    }

    #[test]
    fn roc_endpoints() {
        let roc = roc_curve(&[0.1, 0.2], &[0.5, 0.6]);
        assert_eq!(roc.len(), ROC_STEPS + 1);
        assert_eq!((roc[0].far, roc[0].frr), (0.0, 1.0));
        assert_eq!((roc[100].far, roc[100].frr), (1.0, 0.0));
        let mid = roc.iter().find(|p| p.threshold == 0.3).unwrap();
        assert_eq!((mid.far, mid.frr), (0.0, 0.0));
        assert!(roc_csv(&roc).starts_with("threshold,FAR,FRR\n0.0,0.0,1.0\n"));
    }
}
