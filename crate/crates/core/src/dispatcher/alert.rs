use std::fs::OpenOptions;
use std::io::Write;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{spc_chart, DispatchError, Event, EventKind};
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    /// At least `n` verify rejects within the window.
    NRejectsInWindow,
    /// The newest fused score falls outside the ±3σ limits of the last `n` scores.
    SpcOutOfControl,
    /// At least `n` identification misses within the window.
    UnknownIdentifyBurst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertRule {
    pub rule_id: String,
    pub trigger: Trigger,
    pub n: usize,
    pub window_secs: u64,
    pub sinks: Vec<String>,
}

impl AlertRule {
    pub fn new(rule_id: &str, trigger: Trigger, n: usize, window_secs: u64, sinks: Vec<String>) -> Self {
        AlertRule {
            rule_id: rule_id.to_string(),
            trigger,
            n,
            window_secs,
            sinks,
        }
    }

    pub fn window_ms(&self) -> i64 {
        self.window_secs as i64 * 1000
    }

    fn count_recent(&self, events: &[Event], kind: EventKind, now: Timestamp) -> usize {
        let start = now.millis() - self.window_ms();
        events
            .iter()
            .filter(|e| e.kind == kind && e.timestamp.millis() > start && e.timestamp <= now)
            .count()
    }

    /// `Some(message)` when the rule fires for `event`, which must already
    /// be the last entry of `events`.
    pub(super) fn check(&self, events: &[Event], event: &Event) -> Result<Option<String>, DispatchError> {
        match self.trigger {
            Trigger::NRejectsInWindow | Trigger::UnknownIdentifyBurst => {
                let kind = if self.trigger == Trigger::NRejectsInWindow {
                    EventKind::VerifyReject
                } else {
                    EventKind::IdentifyMiss
                };
                if event.kind != kind {
                    return Ok(None);
                }
                let count = self.count_recent(events, kind, event.timestamp);
                Ok((count >= self.n).then(|| {
                    format!("{count} {kind} events within {}s (threshold {})", self.window_secs, self.n)
                }))
            }
            Trigger::SpcOutOfControl => {
                let Some(score) = event.fused_score else {
                    return Ok(None);
                };
                let mut points: Vec<(u64, f64)> = events
                    .iter()
                    .rev()
                    .filter_map(|e| e.fused_score.map(|s| (e.event_id, s)))
                    .take(self.n)
                    .collect();
                if points.len() < self.n {
                    return Ok(None);
                }
                points.reverse();
                let chart = spc_chart(&points)?;
                let last = chart.points.last().expect("window of at least 2");
                Ok(last.flagged.then(|| {
                    format!(
                        "fused score {score:.4} outside control limits [{:.4}, {:.4}] (event {})",
                        chart.lcl, chart.ucl, event.event_id
                    )
                }))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinkKind {
    EmailStub,
    SmsStub,
    File,
    Stdout,
}

impl SinkKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SinkKind::EmailStub => "email_stub",
            SinkKind::SmsStub => "sms_stub",
            SinkKind::File => "file",
            SinkKind::Stdout => "stdout",
        }
    }
}

/// `address` is the target file for every kind except `stdout`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NotificationSink {
    pub sink_id: String,
    pub kind: SinkKind,
    #[serde(default)]
    pub address: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub retries: u32,
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            retries: 3,
            backoff_ms: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DispatcherConfig {
    #[serde(default)]
    pub rules: Vec<AlertRule>,
    #[serde(default)]
    pub sinks: Vec<NotificationSink>,
    #[serde(default)]
    pub retry: RetryPolicy,
}

impl DispatcherConfig {
    pub fn validate(&self) -> Result<(), DispatchError> {
        let bad = |m: String| Err(DispatchError::Config(m));
        for (i, s) in self.sinks.iter().enumerate() {
            if self.sinks[..i].iter().any(|o| o.sink_id == s.sink_id) {
                return bad(format!("duplicate sink id {:?}", s.sink_id));
            }
            if s.kind != SinkKind::Stdout && s.address.is_empty() {
                return bad(format!("sink {:?} needs a target file", s.sink_id));
            }
        }
        for (i, r) in self.rules.iter().enumerate() {
            if self.rules[..i].iter().any(|o| o.rule_id == r.rule_id) {
                return bad(format!("duplicate rule id {:?}", r.rule_id));
            }
            if r.n < 1 || r.window_secs == 0 {
                return bad(format!("rule {:?} needs n >= 1 and a positive window", r.rule_id));
            }
            if r.trigger == Trigger::SpcOutOfControl && r.n < 2 {
                return bad(format!("rule {:?}: a control chart needs n >= 2", r.rule_id));
            }
            if let Some(s) = r.sinks.iter().find(|s| !self.sinks.iter().any(|k| &k.sink_id == *s)) {
                return bad(format!("rule {:?} names unknown sink {s:?}", r.rule_id));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    pub alert_event_id: u64,
    pub rule_id: String,
    pub sink_id: String,
    pub timestamp: Timestamp,
    pub ok: bool,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaisedAlert {
    pub event: Event,
    pub rule_id: String,
    pub message: String,
    pub deliveries: Vec<DeliveryRecord>,
}

/// `timestamp \t sink kind \t rule_id \t message`, without the newline.
/// Tabs and line breaks inside fields become spaces.
pub fn format_notification_line(at: Timestamp, kind: SinkKind, rule_id: &str, message: &str) -> String {
    let clean = |s: &str| s.replace(['\t', '\n', '\r'], " ");
    format!("{}\t{}\t{}\t{}", at.to_iso8601(), kind.as_str(), clean(rule_id), clean(message))
}

/// Delivers one line; a failing target is retried with a fixed backoff and
/// the outcome is returned as a record, never as an error.
pub(super) fn dispatch_notification(
    sink: &NotificationSink,
    rule_id: &str,
    alert_event_id: u64,
    message: &str,
    at: Timestamp,
    retry: &RetryPolicy,
) -> DeliveryRecord {
    let line = format_notification_line(at, sink.kind, rule_id, message);
    let mut attempts = 0;
    let error = loop {
        attempts += 1;
        let result = match sink.kind {
            SinkKind::Stdout => {
                println!("{line}");
                Ok(())
            }
            _ => OpenOptions::new()
                .create(true)
                .append(true)
                .open(&sink.address)
                .and_then(|mut f| f.write_all(format!("{line}\n").as_bytes())),
        };
        match result {
            Ok(()) => break None,
            Err(e) if attempts > retry.retries => break Some(e.to_string()),
            Err(_) => std::thread::sleep(Duration::from_millis(retry.backoff_ms)),
        }
    };
    tracing::debug!(sink = %sink.sink_id, rule_id, attempts, ok = error.is_none(), "notification");
    DeliveryRecord {
        alert_event_id,
        rule_id: rule_id.to_string(),
        sink_id: sink.sink_id.clone(),
        timestamp: at,
        ok: error.is_none(),
        attempts,
        error,
    }
}
