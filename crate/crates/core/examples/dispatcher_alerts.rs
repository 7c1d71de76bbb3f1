// Event log, alert rules with stub e-mail/SMS sinks, status report and a
// Shewhart control chart of fused scores.

use iris_core::dispatcher::{
    AlertRule, Dispatcher, DispatcherConfig, EventDraft, EventKind, NotificationSink, RetryPolicy, SinkKind, Trigger,
};
use iris_core::time::Timestamp;

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let mail = dir.path().join("supervisor-mail.log");
    let sms = dir.path().join("police-sms.log");
    let config = DispatcherConfig {
        sinks: vec![
            NotificationSink {
                sink_id: "supervisor".into(),
                kind: SinkKind::EmailStub,
                address: mail.display().to_string(),
            },
            NotificationSink {
                sink_id: "police".into(),
                kind: SinkKind::SmsStub,
                address: sms.display().to_string(),
            },
        ],
        rules: vec![
            AlertRule::new("forced-entry", Trigger::NRejectsInWindow, 3, 60, vec!["supervisor".into(), "police".into()]),
            AlertRule::new("score-drift", Trigger::SpcOutOfControl, 15, 300, vec!["supervisor".into()]),
        ],
        retry: RetryPolicy::default(),
    };
    let mut d = Dispatcher::open(dir.path().join("events.ndjson"), config).unwrap();

    let t0 = Timestamp::parse("2026-03-02T08:00:00Z").unwrap();
    for i in 0..20 {
        let draft = EventDraft::new(EventKind::VerifyAccept, t0.plus_secs(i * 170))
            .subject(format!("staff{:02}", i % 4))
            .door(if i % 2 == 0 { "north" } else { "south" })
            .score(0.03 + 0.002 * (i % 5) as f64);
        d.record_event(draft).unwrap();
    }
    for s in [3600, 3604, 3611] {
        let draft = EventDraft::new(EventKind::VerifyReject, t0.plus_secs(s))
            .subject("staff02")
            .door("north")
            .score(0.31);
        for alert in d.record_event(draft).unwrap().1 {
            println!("ALERT {} (event {}): {}", alert.rule_id, alert.event.event_id, alert.message);
            for r in &alert.deliveries {
                println!("   -> {} ok={} attempts={}", r.sink_id, r.ok, r.attempts);
            }
        }
    }
    println!("sms line: {}", std::fs::read_to_string(&sms).unwrap().trim_end());

    let report = d.build_report(t0, t0.plus_secs(2 * 3600)).unwrap();
    println!("report: {} events; per door:", report.total_events);
    for (door, kinds) in &report.per_door {
        println!("   {door}: {kinds:?}");
    }
    println!("hourly flow: {:?}", report.flow.iter().map(|b| b.count).collect::<Vec<_>>());

    let chart = d.spc(20).unwrap();
    println!(
        "SPC over {}: mean {:.4} sigma {:.4} UCL {:.4}; flagged events {:?}",
        chart.window,
        chart.mean,
        chart.sigma,
        chart.ucl,
        chart.points.iter().filter(|p| p.flagged).map(|p| p.event_id).collect::<Vec<_>>()
    );
}
