use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DispatchError, Event, EventKind};
use crate::time::Timestamp;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
const HOUR_MS: i64 = 3_600_000;
/// Guards the histogram against absurd periods (about eleven years).
const MAX_BINS: i64 = 100_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectCounts {
    /// verify_accept, identify_hit, door_open
    pub accepted: u64,
    /// verify_reject, door_deny
    pub rejected: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HourBin {
    pub start: Timestamp,
    pub end: Timestamp,
    pub count: u64,
}

/// Counts over the half-open period `[from, to)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusReport {
    pub schema_version: u32,
    pub from: Timestamp,
    pub to: Timestamp,
    pub per_door: BTreeMap<String, BTreeMap<EventKind, u64>>,
    pub per_subject: BTreeMap<String, SubjectCounts>,
    /// Hour-wide bins from `from`; the last one ends at `to`.
    pub flow: Vec<HourBin>,
    pub totals: BTreeMap<EventKind, u64>,
    pub total_events: u64,
}

pub(super) fn build_report(events: &[Event], from: Timestamp, to: Timestamp) -> Result<StatusReport, DispatchError> {
    if from >= to {
        return Err(DispatchError::Period(format!(
            "from {} is not before to {}",
            from.to_iso8601(),
            to.to_iso8601()
        )));
    }
    let span = to.millis() - from.millis();
    let bins = (span + HOUR_MS - 1) / HOUR_MS;
    if bins > MAX_BINS {
        return Err(DispatchError::Period(format!("period spans {bins} hours, limit {MAX_BINS}")));
    }
    let mut flow: Vec<HourBin> = (0..bins)
        .map(|i| HourBin {
            start: from.plus_millis(i * HOUR_MS),
            end: Timestamp((from.millis() + (i + 1) * HOUR_MS).min(to.millis())),
            count: 0,
        })
        .collect();
    let mut per_door: BTreeMap<String, BTreeMap<EventKind, u64>> = BTreeMap::new();
    let mut per_subject: BTreeMap<String, SubjectCounts> = BTreeMap::new();
    let mut totals: BTreeMap<EventKind, u64> = BTreeMap::new();
    let mut total_events = 0;
    for e in events.iter().filter(|e| e.timestamp >= from && e.timestamp < to) {
        *per_door.entry(e.door_id.clone()).or_default().entry(e.kind).or_default() += 1;
        *totals.entry(e.kind).or_default() += 1;
        total_events += 1;
        flow[((e.timestamp.millis() - from.millis()) / HOUR_MS) as usize].count += 1;
        if let Some(s) = &e.subject_id {
            let c = per_subject.entry(s.clone()).or_default();
            match e.kind {
                EventKind::VerifyAccept | EventKind::IdentifyHit | EventKind::DoorOpen => c.accepted += 1,
                EventKind::VerifyReject | EventKind::DoorDeny => c.rejected += 1,
                _ => {}
            }
        }
    }
    per_subject.retain(|_, c| c.accepted + c.rejected > 0);
    Ok(StatusReport {
        schema_version: REPORT_SCHEMA_VERSION,
        from,
        to,
        per_door,
        per_subject,
        flow,
        totals,
        total_events,
    })
}

impl StatusReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Long-format CSV: `section,key,metric,value`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut row = |a: &str, b: &str, c: &str, d: String| {
            w.write_record([a, b, c, d.as_str()]).expect("in-memory csv");
        };
        row("section", "key", "metric", "value".into());
        row("period", "from", "", self.from.to_iso8601());
        row("period", "to", "", self.to.to_iso8601());
        for (door, kinds) in &self.per_door {
            for (kind, n) in kinds {
                row("door", door, kind.as_str(), n.to_string());
            }
        }
        for (subject, c) in &self.per_subject {
            row("subject", subject, "accepted", c.accepted.to_string());
            row("subject", subject, "rejected", c.rejected.to_string());
        }
        for bin in &self.flow {
            row("flow", &bin.start.to_iso8601(), "events", bin.count.to_string());
        }
        for (kind, n) in &self.totals {
            row("total", "", kind.as_str(), n.to_string());
        }
        row("total", "", "all", self.total_events.to_string());
        drop(row);
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }
}
