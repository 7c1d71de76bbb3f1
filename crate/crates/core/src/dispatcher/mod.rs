//! Dispatcher: the durable event log, status reports, SPC charts and the
//! alert rules that fan notifications out to sinks.
//!
//! The log is newline-delimited JSON, one event per line, each line
//! carrying `schema_version`. Acknowledged alert ids live in a sidecar
//! `<log>.acks`; delivery records in `<log>.deliveries`.

mod alert;
mod report;
mod spc;

pub use alert::{
    format_notification_line, AlertRule, DeliveryRecord, DispatcherConfig, NotificationSink, RaisedAlert,
    RetryPolicy, SinkKind, Trigger,
};
pub use report::{HourBin, StatusReport, SubjectCounts};
pub use spc::{spc_chart, ControlChart, ControlPoint};

use std::collections::{BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::Timestamp;

pub const EVENT_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_DOOR: &str = "main";

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("event log corrupt at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("unknown event kind {0:?}")]
    UnknownKind(String),
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("invalid period: {0}")]
    Period(String),
    #[error("control chart window must be at least 2, got {0}")]
    Window(usize),
    #[error("invalid dispatcher configuration: {0}")]
    Config(String),
    #[error("no alert event with id {0}")]
    NotFound(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Enroll,
    VerifyAccept,
    VerifyReject,
    IdentifyHit,
    IdentifyMiss,
    Alert,
    DoorOpen,
    DoorDeny,
}

impl EventKind {
    pub const ALL: [EventKind; 8] = [
        EventKind::Enroll,
        EventKind::VerifyAccept,
        EventKind::VerifyReject,
        EventKind::IdentifyHit,
        EventKind::IdentifyMiss,
        EventKind::Alert,
        EventKind::DoorOpen,
        EventKind::DoorDeny,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Enroll => "enroll",
            EventKind::VerifyAccept => "verify_accept",
            EventKind::VerifyReject => "verify_reject",
            EventKind::IdentifyHit => "identify_hit",
            EventKind::IdentifyMiss => "identify_miss",
            EventKind::Alert => "alert",
            EventKind::DoorOpen => "door_open",
            EventKind::DoorDeny => "door_deny",
        }
    }
}

impl FromStr for EventKind {
    type Err = DispatchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| DispatchError::UnknownKind(s.to_string()))
    }
}

impl std::fmt::Display for EventKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An event before the log assigns its id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventDraft {
    pub timestamp: Timestamp,
    pub kind: EventKind,
    #[serde(default)]
    pub subject_id: Option<String>,
    #[serde(default = "default_door")]
    pub door_id: String,
    #[serde(default)]
    pub fused_score: Option<f64>,
    #[serde(default)]
    pub details: String,
}

fn default_door() -> String {
    DEFAULT_DOOR.to_string()
}

impl EventDraft {
    pub fn new(kind: EventKind, timestamp: Timestamp) -> Self {
        EventDraft {
            timestamp,
            kind,
            subject_id: None,
            door_id: default_door(),
            fused_score: None,
            details: String::new(),
        }
    }

    pub fn subject(mut self, id: impl Into<String>) -> Self {
        self.subject_id = Some(id.into());
        self
    }

    pub fn door(mut self, id: impl Into<String>) -> Self {
        self.door_id = id.into();
        self
    }

    pub fn score(mut self, s: f64) -> Self {
        self.fused_score = Some(s);
        self
    }

    pub fn details(mut self, d: impl Into<String>) -> Self {
        self.details = d.into();
        self
    }

    /// Parses a draft from an external JSON feed; an unknown `kind` token
    /// is rejected here, before any id is handed out.
    pub fn from_json(text: &str) -> Result<Self, DispatchError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| DispatchError::InvalidEvent(e.to_string()))?;
        if let Some(kind) = value.get("kind").and_then(|k| k.as_str()) {
            EventKind::from_str(kind)?;
        }
        serde_json::from_value(value).map_err(|e| DispatchError::InvalidEvent(e.to_string()))
    }

    fn validate(&self) -> Result<(), DispatchError> {
        if self.door_id.is_empty() || self.door_id.chars().any(|c| c.is_whitespace() || c == ',') {
            return Err(DispatchError::InvalidEvent(format!("bad door id {:?}", self.door_id)));
        }
        if let Some(s) = self.fused_score {
            if !s.is_finite() {
                return Err(DispatchError::InvalidEvent("fused score must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub event_id: u64,
    pub timestamp: Timestamp,
    pub kind: EventKind,
    pub subject_id: Option<String>,
    pub door_id: String,
    pub fused_score: Option<f64>,
    pub details: String,
    /// Set on alert events: the rule that raised them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_id: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct LogLine {
    schema_version: u32,
    #[serde(flatten)]
    event: Event,
}

pub struct Dispatcher {
    log_path: PathBuf,
    log: File,
    events: Vec<Event>,
    config: DispatcherConfig,
    last_raised: HashMap<String, Timestamp>,
    acks: BTreeSet<u64>,
    deliveries: Vec<DeliveryRecord>,
}

impl std::fmt::Debug for Dispatcher {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dispatcher")
            .field("log_path", &self.log_path)
            .field("events", &self.events.len())
            .field("rules", &self.config.rules.len())
            .finish()
    }
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

impl Dispatcher {
    /// Opens (or creates) the log and replays it. A final line without
    /// its newline that fails to parse is a torn write and is cut off.
    pub fn open(log_path: impl AsRef<Path>, config: DispatcherConfig) -> Result<Self, DispatchError> {
        config.validate()?;
        let log_path = log_path.as_ref().to_path_buf();
        let text = match fs::read_to_string(&log_path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(e.into()),
        };
        let mut events: Vec<Event> = Vec::new();
        let mut good_len = 0usize;
        for (i, line) in text.split_inclusive('\n').enumerate() {
            let complete = line.ends_with('\n');
            let body = line.trim_end_matches('\n');
            if body.trim().is_empty() {
                good_len += line.len();
                continue;
            }
            match serde_json::from_str::<LogLine>(body) {
                Ok(l) => {
                    if l.schema_version != EVENT_SCHEMA_VERSION {
                        return Err(DispatchError::Corrupt {
                            line: i + 1,
                            reason: format!("unsupported schema version {}", l.schema_version),
                        });
                    }
                    if events.last().is_some_and(|p| p.event_id >= l.event.event_id) {
                        return Err(DispatchError::Corrupt {
                            line: i + 1,
                            reason: "event ids not increasing".into(),
                        });
                    }
                    events.push(l.event);
                    good_len += line.len();
                }
                Err(_) if !complete => break,
                Err(e) => {
                    return Err(DispatchError::Corrupt {
                        line: i + 1,
                        reason: e.to_string(),
                    })
                }
            }
        }
        let log = OpenOptions::new().create(true).append(true).open(&log_path)?;
        if good_len < text.len() {
            log.set_len(good_len as u64)?;
        }
        let mut last_raised = HashMap::new();
        for e in &events {
            if let (EventKind::Alert, Some(rule)) = (e.kind, &e.rule_id) {
                last_raised.insert(rule.clone(), e.timestamp);
            }
        }
        let acks = match fs::read_to_string(sidecar(&log_path, ".acks")) {
            Ok(t) => t.lines().filter_map(|l| l.trim().parse().ok()).collect(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeSet::new(),
            Err(e) => return Err(e.into()),
        };
        Ok(Dispatcher {
            log_path,
            log,
            events,
            config,
            last_raised,
            acks,
            deliveries: Vec::new(),
        })
    }

    pub fn log_path(&self) -> &Path {
        &self.log_path
    }

    pub fn config(&self) -> &DispatcherConfig {
        &self.config
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Events with `event_id > since`.
    pub fn events_since(&self, since: u64) -> &[Event] {
        let start = self.events.partition_point(|e| e.event_id <= since);
        &self.events[start..]
    }

    pub fn next_event_id(&self) -> u64 {
        self.events.last().map_or(1, |e| e.event_id + 1)
    }

    pub fn deliveries(&self) -> &[DeliveryRecord] {
        &self.deliveries
    }

    fn append(&mut self, draft: EventDraft, rule_id: Option<String>) -> Result<Event, DispatchError> {
        draft.validate()?;
        let event = Event {
            event_id: self.next_event_id(),
            timestamp: draft.timestamp,
            kind: draft.kind,
            subject_id: draft.subject_id,
            door_id: draft.door_id,
            fused_score: draft.fused_score,
            details: draft.details,
            rule_id,
        };
        let mut line = serde_json::to_string(&LogLine {
            schema_version: EVENT_SCHEMA_VERSION,
            event: event.clone(),
        })
        .map_err(|e| DispatchError::InvalidEvent(e.to_string()))?;
        line.push('\n');
        self.log.write_all(line.as_bytes())?;
        self.log.sync_data()?;
        self.events.push(event.clone());
        Ok(event)
    }

    /// Persists the event, then evaluates alert rules against it. Alerts
    /// are only raised for events already on disk.
    pub fn record_event(&mut self, draft: EventDraft) -> Result<(Event, Vec<RaisedAlert>), DispatchError> {
        let event = self.append(draft, None)?;
        let alerts = self.evaluate_alert_rules(&event)?;
        Ok((event, alerts))
    }

    /// Checks every rule against the log as of `event`. A rule that fired
    /// less than its window ago stays quiet.
    pub fn evaluate_alert_rules(&mut self, event: &Event) -> Result<Vec<RaisedAlert>, DispatchError> {
        if event.kind == EventKind::Alert {
            return Ok(Vec::new());
        }
        let mut raised = Vec::new();
        let rules = self.config.rules.clone();
        for rule in &rules {
            let window_ms = rule.window_ms();
            if let Some(&last) = self.last_raised.get(&rule.rule_id) {
                if event.timestamp.millis() - last.millis() < window_ms {
                    continue;
                }
            }
            let Some(message) = rule.check(&self.events, event)? else {
                continue;
            };
            let mut draft = EventDraft::new(EventKind::Alert, event.timestamp)
                .door(event.door_id.clone())
                .details(message.clone());
            draft.subject_id = event.subject_id.clone();
            let alert_event = self.append(draft, Some(rule.rule_id.clone()))?;
            self.last_raised.insert(rule.rule_id.clone(), alert_event.timestamp);
            let mut deliveries = Vec::new();
            for sink_id in &rule.sinks {
                let sink = self
                    .config
                    .sinks
                    .iter()
                    .find(|s| &s.sink_id == sink_id)
                    .expect("validated sink reference")
                    .clone();
                let record = alert::dispatch_notification(
                    &sink,
                    &rule.rule_id,
                    alert_event.event_id,
                    &message,
                    alert_event.timestamp,
                    &self.config.retry,
                );
                self.persist_delivery(&record)?;
                deliveries.push(record);
            }
            self.deliveries.extend(deliveries.iter().cloned());
            raised.push(RaisedAlert {
                event: alert_event,
                rule_id: rule.rule_id.clone(),
                message,
                deliveries,
            });
        }
        Ok(raised)
    }

    fn persist_delivery(&self, record: &DeliveryRecord) -> Result<(), DispatchError> {
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(sidecar(&self.log_path, ".deliveries"))?;
        let mut line = serde_json::to_string(record).map_err(|e| DispatchError::InvalidEvent(e.to_string()))?;
        line.push('\n');
        f.write_all(line.as_bytes())?;
        Ok(())
    }

    pub fn build_report(&self, from: Timestamp, to: Timestamp) -> Result<StatusReport, DispatchError> {
        report::build_report(&self.events, from, to)
    }

    /// Control chart over the last `window` events that carry a fused score
    /// (fewer when the log holds fewer; at least two are required).
    pub fn spc(&self, window: usize) -> Result<ControlChart, DispatchError> {
        if window < 2 {
            return Err(DispatchError::Window(window));
        }
        let mut points: Vec<(u64, f64)> = self
            .events
            .iter()
            .rev()
            .filter_map(|e| e.fused_score.map(|s| (e.event_id, s)))
            .take(window)
            .collect();
        points.reverse();
        spc_chart(&points)
    }

    pub fn is_acknowledged(&self, alert_id: u64) -> bool {
        self.acks.contains(&alert_id)
    }

    /// Marks an alert event acknowledged. Idempotent; persisted.
    pub fn acknowledge(&mut self, alert_id: u64) -> Result<bool, DispatchError> {
        let is_alert = self
            .events
            .binary_search_by_key(&alert_id, |e| e.event_id)
            .ok()
            .is_some_and(|i| self.events[i].kind == EventKind::Alert);
        if !is_alert {
            return Err(DispatchError::NotFound(alert_id));
        }
        if !self.acks.insert(alert_id) {
            return Ok(false);
        }
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(sidecar(&self.log_path, ".acks"))?;
        writeln!(f, "{alert_id}")?;
        f.sync_data()?;
        Ok(true)
    }

    pub fn unacknowledged_alerts(&self) -> impl Iterator<Item = &Event> {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::Alert && !self.acks.contains(&e.event_id))
    }
}
