//! Service facade: the two-factor verify flow, identification, enrollment
//! and reporting over one store, one event log and one tuned model.
//!
//! Verify runs its stages in a fixed order — `pin`, `segmentation`,
//! `morphology`, `match` — and stops at the first failure, so a wrong code
//! never reaches image processing. Every verify or identify call, whatever
//! its outcome, appends exactly one terminal event.

pub mod http;
mod model;
mod simulate;

pub use model::{
    encode_identities, pair_samples, tune_model, Identity, PairSamples, TuneConfig, TunedModel, MODEL_FORMAT_VERSION,
    UNTRAINED_THRESHOLD,
};
pub use simulate::{
    analyze_corpus, load_corpus, population_params, roc_csv, roc_curve, simulate_corpus, subject_name, CorpusImage,
    Manifest, RocPoint, SimulationConfig, SimulationOutput, MANIFEST_FILE, ROC_FILE,
};

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock, RwLockReadGuard, RwLockWriteGuard};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispatcher::{DispatchError, Dispatcher, DispatcherConfig, EventDraft, EventKind, DEFAULT_DOOR};
use crate::imaging::{ImagingError, RgbImage};
use crate::pipeline::{analyze, encode, EncodedEye, PipelineError};
use crate::store::{self, validate_pin, EnrollRequest, Store, StoreError, SubjectRecord};
use crate::time::Timestamp;

pub const API_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("{0}")]
    PinFormat(String),
    #[error("subject {0:?} not found")]
    NotFound(String),
    #[error(transparent)]
    Store(StoreError),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error(transparent)]
    Image(#[from] ImagingError),
    #[error("model: {0}")]
    Model(String),
    #[error("training: {0}")]
    Training(String),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<StoreError> for GatewayError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::PinFormat(m) => GatewayError::PinFormat(m),
            StoreError::NotFound(id) => GatewayError::NotFound(id),
            other => GatewayError::Store(other),
        }
    }
}

/// Coarse classification used for exit codes and HTTP statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    NotFound,
    Conflict,
    Unprocessable,
    Internal,
}

impl GatewayError {
    pub fn class(&self) -> ErrorClass {
        match self {
            GatewayError::PinFormat(_) | GatewayError::Invalid(_) | GatewayError::Image(ImagingError::Pnm(_)) => {
                ErrorClass::Usage
            }
            GatewayError::Image(ImagingError::Dimensions { .. }) => ErrorClass::Usage,
            GatewayError::NotFound(_) | GatewayError::Dispatch(DispatchError::NotFound(_)) => ErrorClass::NotFound,
            GatewayError::Store(StoreError::DuplicateSubject(_)) => ErrorClass::Conflict,
            GatewayError::Store(StoreError::InsufficientEnrollment { .. } | StoreError::Invalid(_)) => {
                ErrorClass::Unprocessable
            }
            GatewayError::Dispatch(DispatchError::Period(_) | DispatchError::Window(_)) => ErrorClass::Usage,
            _ => ErrorClass::Internal,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            GatewayError::PinFormat(_) => "PinFormatError",
            GatewayError::NotFound(_) | GatewayError::Dispatch(DispatchError::NotFound(_)) => "NotFoundError",
            GatewayError::Store(StoreError::DuplicateSubject(_)) => "DuplicateSubjectError",
            GatewayError::Store(StoreError::InsufficientEnrollment { .. }) => "InsufficientEnrollmentError",
            GatewayError::Dispatch(DispatchError::Period(_)) => "PeriodError",
            GatewayError::Dispatch(DispatchError::Window(_)) => "WindowError",
            GatewayError::Image(_) => "ImageError",
            GatewayError::Invalid(_) => "InvalidRequest",
            _ => "InternalError",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Pin,
    Segmentation,
    Morphology,
    Match,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Pin => "pin",
            Stage::Segmentation => "segmentation",
            Stage::Morphology => "morphology",
            Stage::Match => "match",
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyRequest {
    pub subject_id: String,
    pub pin: String,
    pub image: RgbImage,
    pub door_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub schema_version: u32,
    pub accepted: bool,
    pub fused_score: Option<f64>,
    pub stage_failed: Option<Stage>,
    pub event_id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifyResult {
    pub schema_version: u32,
    /// The matched subject, or `None` for a miss.
    pub subject_id: Option<String>,
    /// Best fused score over all templates, when any was computed.
    pub fused_score: Option<f64>,
    pub stage_failed: Option<Stage>,
    pub event_id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrollResult {
    pub schema_version: u32,
    pub subject_id: String,
    pub templates: usize,
    pub event_id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectSummary {
    pub subject_id: String,
    pub display_name: String,
    pub templates: usize,
    pub enrolled_at: Timestamp,
}

/// Where a system keeps its state. The event log and the optional alert
/// configuration sit beside the store file by default.
#[derive(Debug, Clone)]
pub struct SystemPaths {
    pub store: PathBuf,
    pub events: PathBuf,
    pub alerts: PathBuf,
}

impl SystemPaths {
    pub fn beside_store(store: impl AsRef<Path>) -> Self {
        let store = store.as_ref().to_path_buf();
        let with = |suffix: &str| {
            let mut name = store.file_name().unwrap_or_default().to_os_string();
            name.push(suffix);
            store.with_file_name(name)
        };
        SystemPaths {
            events: with(".events.ndjson"),
            alerts: with(".alerts.json"),
            store,
        }
    }

    /// The alert configuration, or an empty one when the file is absent.
    pub fn load_alerts(&self) -> Result<DispatcherConfig, GatewayError> {
        match std::fs::read_to_string(&self.alerts) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| GatewayError::Invalid(format!("{}: {e}", self.alerts.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(DispatcherConfig::default()),
            Err(e) => Err(e.into()),
        }
    }
}

pub type Clock = Arc<dyn Fn() -> Timestamp + Send + Sync>;

/// Store (single writer, many readers), event log (serialized), model
/// (read-only) and a count of segmentation runs for observability.
pub struct IrisSystem {
    store: RwLock<Store>,
    dispatcher: Mutex<Dispatcher>,
    model: TunedModel,
    clock: Clock,
    segmentation_runs: AtomicU64,
}

impl std::fmt::Debug for IrisSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IrisSystem")
            .field("segmentation_runs", &self.segmentation_runs)
            .finish_non_exhaustive()
    }
}

enum VerifyOutcome {
    Rejected(Stage, Option<f64>),
    Accepted(f64),
}

impl IrisSystem {
    pub fn new(store: Store, dispatcher: Dispatcher, model: TunedModel) -> Result<Self, GatewayError> {
        model.validate()?;
        Ok(IrisSystem {
            store: RwLock::new(store),
            dispatcher: Mutex::new(dispatcher),
            model,
            clock: Arc::new(Timestamp::now),
            segmentation_runs: AtomicU64::new(0),
        })
    }

    pub fn open(paths: &SystemPaths, model: TunedModel) -> Result<Self, GatewayError> {
        let store = Store::open(&paths.store)?;
        let dispatcher = Dispatcher::open(&paths.events, paths.load_alerts()?)?;
        IrisSystem::new(store, dispatcher, model)
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn now(&self) -> Timestamp {
        (self.clock)()
    }

    pub fn model(&self) -> &TunedModel {
        &self.model
    }

    /// Number of probes that have entered segmentation so far.
    pub fn segmentation_runs(&self) -> u64 {
        self.segmentation_runs.load(Ordering::SeqCst)
    }

    pub fn store(&self) -> RwLockReadGuard<'_, Store> {
        self.store.read().unwrap_or_else(|p| p.into_inner())
    }

    fn store_mut(&self) -> RwLockWriteGuard<'_, Store> {
        self.store.write().unwrap_or_else(|p| p.into_inner())
    }

    pub fn dispatcher(&self) -> MutexGuard<'_, Dispatcher> {
        self.dispatcher.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn record(&self, draft: EventDraft) -> Result<u64, GatewayError> {
        let (event, alerts) = self.dispatcher().record_event(draft)?;
        for a in &alerts {
            tracing::warn!(rule = %a.rule_id, event_id = a.event.event_id, "{}", a.message);
        }
        Ok(event.event_id)
    }

    fn probe(&self, image: &RgbImage) -> Result<EncodedEye, Stage> {
        self.segmentation_runs.fetch_add(1, Ordering::SeqCst);
        match analyze(image, &self.model.pipeline) {
            Ok(a) => encode(&a, &self.model.selector).map_err(|_| Stage::Segmentation),
            Err(PipelineError::Morphology(_)) => Err(Stage::Morphology),
            Err(_) => Err(Stage::Segmentation),
        }
    }

    pub fn enroll(&self, subject_id: &str, display_name: &str, pin: &str, images: &[RgbImage]) -> Result<EnrollResult, GatewayError> {
        let now = self.now();
        let record: SubjectRecord = {
            let mut store = self.store_mut();
            let req = EnrollRequest {
                subject_id,
                display_name,
                pin,
                images,
            };
            store::enroll(&mut store, &req, &self.model.pipeline, &self.model.selector, now)?
        };
        let event_id = self.record(
            EventDraft::new(EventKind::Enroll, now)
                .subject(subject_id)
                .details(format!("{} templates", record.templates.len())),
        )?;
        Ok(EnrollResult {
            schema_version: API_SCHEMA_VERSION,
            subject_id: record.subject_id,
            templates: record.templates.len(),
            event_id,
        })
    }

    /// Two-factor verification. Malformed codes and unknown subjects are
    /// errors, but they are still logged as a rejection first.
    pub fn run_verify(&self, req: &VerifyRequest) -> Result<Decision, GatewayError> {
        let now = self.now();
        let door = req.door_id.clone().unwrap_or_else(|| DEFAULT_DOOR.into());
        let reject = |details: String| {
            EventDraft::new(EventKind::VerifyReject, now)
                .subject(req.subject_id.clone())
                .door(door.clone())
                .details(details)
        };
        if let Err(e) = validate_pin(&req.pin) {
            self.record(reject("stage=pin; malformed code".into()))?;
            return Err(e.into());
        }
        let (pin_ok, templates) = {
            let store = self.store();
            match store.lookup(&req.subject_id) {
                Ok(rec) => (rec.pin_hash.verify(&req.pin), rec.templates.clone()),
                Err(e) => {
                    drop(store);
                    self.record(reject("stage=pin; unknown subject".into()))?;
                    return Err(e.into());
                }
            }
        };

        let version = self.model.selector.version_token();
        let outcome = if !pin_ok {
            VerifyOutcome::Rejected(Stage::Pin, None)
        } else {
            match self.probe(&req.image) {
                Err(stage) => VerifyOutcome::Rejected(stage, None),
                Ok(eye) => {
                    let mut best: Option<f64> = None;
                    for t in templates.iter().filter(|t| t.selector_version == version) {
                        let sample =
                            crate::pipeline::compare_parts(&eye.code, &eye.geom, &t.code, &t.geom, &eye.positions)
                                .map_err(|e| GatewayError::Model(e.to_string()))?;
                        let fused = self.model.weights.score(&sample).map_err(|e| GatewayError::Model(e.to_string()))?.fused;
                        best = Some(best.map_or(fused, |b: f64| b.min(fused)));
                    }
                    match best {
                        Some(s) if s < self.model.weights.threshold => VerifyOutcome::Accepted(s),
                        other => VerifyOutcome::Rejected(Stage::Match, other),
                    }
                }
            }
        };

        let (accepted, fused_score, stage_failed, draft) = match outcome {
            VerifyOutcome::Accepted(s) => (
                true,
                Some(s),
                None,
                EventDraft::new(EventKind::VerifyAccept, now)
                    .subject(req.subject_id.clone())
                    .door(door.clone())
                    .score(s)
                    .details("stages=pin,segmentation,morphology,match"),
            ),
            VerifyOutcome::Rejected(stage, score) => {
                let mut d = reject(format!("stage={}", stage.as_str()));
                d.fused_score = score;
                (false, score, Some(stage), d)
            }
        };
        let event_id = self.record(draft)?;
        Ok(Decision {
            schema_version: API_SCHEMA_VERSION,
            accepted,
            fused_score,
            stage_failed,
            event_id,
        })
    }

    /// One-to-many search without a code. The best subject is the one with
    /// the lowest fused score over its templates; ties go to the lower id.
    pub fn run_identify(&self, image: &RgbImage, door_id: Option<&str>) -> Result<IdentifyResult, GatewayError> {
        let now = self.now();
        let door = door_id.unwrap_or(DEFAULT_DOOR).to_string();
        let mut stage_failed = None;
        let mut best: Option<(String, f64)> = None;
        match self.probe(image) {
            Err(stage) => stage_failed = Some(stage),
            Ok(eye) => {
                let version = self.model.selector.version_token();
                let store = self.store();
                for (subject, t) in store.all_templates().filter(|(_, t)| t.selector_version == version) {
                    let sample = crate::pipeline::compare_parts(&eye.code, &eye.geom, &t.code, &t.geom, &eye.positions)
                        .map_err(|e| GatewayError::Model(e.to_string()))?;
                    let fused = self.model.weights.score(&sample).map_err(|e| GatewayError::Model(e.to_string()))?.fused;
                    // templates arrive ordered by subject id, so strict `<` keeps the lower id on ties
                    if best.as_ref().is_none_or(|(_, b)| fused < *b) {
                        best = Some((subject.to_string(), fused));
                    }
                }
            }
        }
        let fused_score = best.as_ref().map(|b| b.1);
        let hit = best.filter(|(_, s)| *s < self.model.weights.threshold).map(|b| b.0);
        if hit.is_none() && stage_failed.is_none() && fused_score.is_some() {
            stage_failed = Some(Stage::Match);
        }
        let mut draft = match &hit {
            Some(s) => EventDraft::new(EventKind::IdentifyHit, now).subject(s.clone()),
            None => EventDraft::new(EventKind::IdentifyMiss, now),
        }
        .door(door);
        draft.fused_score = fused_score;
        draft.details = match stage_failed {
            Some(s) => format!("stage={}", s.as_str()),
            None => String::new(),
        };
        let event_id = self.record(draft)?;
        Ok(IdentifyResult {
            schema_version: API_SCHEMA_VERSION,
            subject_id: hit,
            fused_score,
            stage_failed,
            event_id,
        })
    }

    pub fn subjects(&self) -> Vec<SubjectSummary> {
        self.store()
            .subjects()
            .map(|s| SubjectSummary {
                subject_id: s.subject_id.clone(),
                display_name: s.display_name.clone(),
                templates: s.templates.len(),
                enrolled_at: s.enrolled_at,
            })
            .collect()
    }

    /// Drops expired raw captures.
    pub fn purge_expired(&self) -> Result<usize, GatewayError> {
        let now = self.now();
        Ok(self.store_mut().purge_expired(now)?)
    }
}
