//! Verify / identify flows, the HTTP API and the `iris` binary.

use std::process::Command;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use iris_core::dispatcher::{
    AlertRule, Dispatcher, DispatcherConfig, EventKind, NotificationSink, RetryPolicy, SinkKind, Trigger,
};
use iris_core::gateway::http::{encode_image, router};
use iris_core::gateway::{GatewayError, IrisSystem, Stage, SystemPaths, TunedModel, VerifyRequest};
use iris_core::imaging::{generate_synthetic_eye, ppm, EyeParams, RgbImage};
use iris_core::pipeline::PipelineConfig;
use iris_core::store::Store;
use iris_core::time::Timestamp;
use serde_json::{json, Value};
use tower::ServiceExt;

fn eye(seed: u64, capture: u64) -> RgbImage {
    static CACHE: OnceLock<std::sync::Mutex<std::collections::HashMap<(u64, u64), RgbImage>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(img) = cache.lock().unwrap().get(&(seed, capture)) {
        return img.clone();
    }
    let img = generate_synthetic_eye(&EyeParams {
        texture_seed: seed,
        capture_seed: capture,
        dilation: 0.95 + 0.05 * (capture % 4) as f64,
        noise_sigma: 3.0,
        ..EyeParams::default()
    })
    .unwrap();
    cache.lock().unwrap().insert((seed, capture), img.clone());
    img
}

fn gray() -> RgbImage {
    RgbImage::filled(256, 256, [128, 128, 128]).unwrap()
}

fn system(dir: &std::path::Path, config: DispatcherConfig) -> IrisSystem {
    let store = Store::open(dir.join("site.iris")).unwrap();
    let log = Dispatcher::open(dir.join("events.ndjson"), config).unwrap();
    let clock = Arc::new(AtomicI64::new(1_760_000_000_000));
    IrisSystem::new(store, log, TunedModel::untrained(PipelineConfig::default()))
        .unwrap()
        .with_clock(Arc::new(move || Timestamp(clock.fetch_add(1000, Ordering::SeqCst))))
}

fn enroll(sys: &IrisSystem, id: &str, pin: &str, seed: u64) {
    sys.enroll(id, &format!("Name {id}"), pin, &[eye(seed, 0), eye(seed, 1), eye(seed, 2)])
        .unwrap();
}

fn verify(sys: &IrisSystem, id: &str, pin: &str, image: RgbImage) -> Result<iris_core::gateway::Decision, GatewayError> {
    sys.run_verify(&VerifyRequest {
        subject_id: id.into(),
        pin: pin.into(),
        image,
        door_id: None,
    })
}

fn terminal_events(sys: &IrisSystem) -> usize {
    sys.dispatcher()
        .events()
        .iter()
        .filter(|e| {
            matches!(
                e.kind,
                EventKind::VerifyAccept | EventKind::VerifyReject | EventKind::IdentifyHit | EventKind::IdentifyMiss
            )
        })
        .count()
}

#[test]
fn verify_stages() {
    let dir = tempfile::tempdir().unwrap();
    let sys = system(dir.path(), DispatcherConfig::default());
    enroll(&sys, "amy", "11111", 21);
    enroll(&sys, "bo", "22222", 22);
    let runs = sys.segmentation_runs();

    let ok = verify(&sys, "amy", "11111", eye(21, 4)).unwrap();
    assert!(ok.accepted && ok.stage_failed.is_none());
    assert!(ok.fused_score.unwrap() < sys.model().weights.threshold);

    let wrong = verify(&sys, "amy", "11112", eye(21, 4)).unwrap();
    assert_eq!((wrong.accepted, wrong.stage_failed, wrong.fused_score), (false, Some(Stage::Pin), None));
    assert_eq!(sys.segmentation_runs(), runs + 1, "a wrong code must not reach segmentation");

    let impostor = verify(&sys, "amy", "11111", eye(22, 4)).unwrap();
    assert_eq!((impostor.accepted, impostor.stage_failed), (false, Some(Stage::Match)));

    let blank = verify(&sys, "amy", "11111", gray()).unwrap();
    assert_eq!(blank.stage_failed, Some(Stage::Segmentation));

    assert!(matches!(verify(&sys, "amy", "1111", eye(21, 4)), Err(GatewayError::PinFormat(_))));
    assert!(matches!(verify(&sys, "zed", "11111", eye(21, 4)), Err(GatewayError::NotFound(_))));

    // six calls, six terminal events, ids in order
    assert_eq!(terminal_events(&sys), 6);
    let ids: Vec<u64> = sys.dispatcher().events().iter().map(|e| e.event_id).collect();
    assert!(ids.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(sys.dispatcher().events()[3].kind, EventKind::VerifyReject);
    assert!(sys.dispatcher().events()[3].details.contains("stage=pin"));
}

#[test]
fn identify_flows() {
    let dir = tempfile::tempdir().unwrap();
    let sys = system(dir.path(), DispatcherConfig::default());
    let empty = sys.run_identify(&eye(31, 5), None).unwrap();
    assert_eq!((empty.subject_id.as_deref(), empty.fused_score, empty.stage_failed), (None, None, None));

    for (i, seed) in [31u64, 32, 33].into_iter().enumerate() {
        enroll(&sys, &format!("p{i}"), "12345", seed);
    }
    let hit = sys.run_identify(&eye(32, 5), Some("gate")).unwrap();
    assert_eq!(hit.subject_id.as_deref(), Some("p1"));
    let miss = sys.run_identify(&eye(99, 5), None).unwrap();
    assert_eq!((miss.subject_id, miss.stage_failed), (None, Some(Stage::Match)));
    let blank = sys.run_identify(&gray(), None).unwrap();
    assert_eq!(blank.stage_failed, Some(Stage::Segmentation));

    // identical template sets tie; the lower id wins
    enroll(&sys, "a-twin", "12345", 33);
    let tie = sys.run_identify(&eye(33, 5), None).unwrap();
    assert_eq!(tie.subject_id.as_deref(), Some("a-twin"));
    assert_eq!(terminal_events(&sys), 5);
    let kinds: Vec<EventKind> = sys.dispatcher().events().iter().map(|e| e.kind).collect();
    assert_eq!(kinds.iter().filter(|k| **k == EventKind::IdentifyHit).count(), 2);
}

#[test]
fn identify_with_one_subject_matches_verify_score() {
    let dir = tempfile::tempdir().unwrap();
    let sys = system(dir.path(), DispatcherConfig::default());
    enroll(&sys, "solo", "24680", 41);
    for probe in [eye(41, 6), eye(42, 0)] {
        let v = verify(&sys, "solo", "24680", probe.clone()).unwrap();
        let i = sys.run_identify(&probe, None).unwrap();
        assert_eq!(v.fused_score, i.fused_score);
        assert_eq!(v.accepted, i.subject_id.is_some());
    }
}

#[test]
fn repeated_rejects_alert_the_sinks() {
    let dir = tempfile::tempdir().unwrap();
    let sink = dir.path().join("guard.log");
    let config = DispatcherConfig {
        sinks: vec![NotificationSink {
            sink_id: "guard".into(),
            kind: SinkKind::File,
            address: sink.display().to_string(),
        }],
        rules: vec![AlertRule::new("three-strikes", Trigger::NRejectsInWindow, 3, 60, vec!["guard".into()])],
        retry: RetryPolicy::default(),
    };
    let sys = system(dir.path(), config);
    enroll(&sys, "amy", "11111", 21);
    for _ in 0..4 {
        verify(&sys, "amy", "99999", eye(21, 3)).unwrap();
    }
    let text = std::fs::read_to_string(&sink).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert_eq!(sys.dispatcher().unacknowledged_alerts().count(), 1);
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or(Body::empty(), |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let text = String::from_utf8_lossy(&bytes).into_owned();
    (status, serde_json::from_str(&text).unwrap_or(Value::Null), text)
}

#[tokio::test]
async fn http_api() {
    let dir = tempfile::tempdir().unwrap();
    let config = DispatcherConfig {
        rules: vec![AlertRule::new("any-reject", Trigger::NRejectsInWindow, 1, 60, vec![])],
        ..DispatcherConfig::default()
    };
    let sys = Arc::new(system(dir.path(), config));
    let app = router(sys.clone());
    let img = |seed, c| encode_image(&eye(seed, c));

    let (s, b, _) = call(
        &app,
        "POST",
        "/api/enroll",
        Some(json!({"subject_id": "kim", "display_name": "Kim", "pin": "31415", "images": [img(51, 0), img(51, 1), img(51, 2)]})),
    )
    .await;
    assert_eq!(s, StatusCode::CREATED, "{b}");
    assert_eq!((b["templates"].as_u64(), b["schema_version"].as_u64()), (Some(3), Some(1)));

    let enroll_again = json!({"subject_id": "kim", "display_name": "Kim", "pin": "31415", "images": [img(51, 0), img(51, 1), img(51, 2)]});
    let (s, b, _) = call(&app, "POST", "/api/enroll", Some(enroll_again)).await;
    assert_eq!((s, b["error"].as_str()), (StatusCode::CONFLICT, Some("DuplicateSubjectError")));

    let (s, b, _) = call(&app, "POST", "/api/enroll", Some(json!({"subject_id": "lee", "display_name": "Lee", "pin": "1234", "images": []}))).await;
    assert_eq!((s, b["error"].as_str()), (StatusCode::BAD_REQUEST, Some("PinFormatError")));

    let (s, b, _) = call(&app, "POST", "/api/verify", Some(json!({"subject_id": "kim", "pin": "31415", "image": img(51, 3)}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!((b["accepted"].as_bool(), b["schema_version"].as_u64()), (Some(true), Some(1)));

    let (_, b, _) = call(&app, "POST", "/api/verify", Some(json!({"subject_id": "kim", "pin": "00000", "image": img(51, 3)}))).await;
    assert_eq!((b["accepted"].as_bool(), b["stage_failed"].as_str()), (Some(false), Some("pin")));

    let (s, b, _) = call(&app, "POST", "/api/verify", Some(json!({"subject_id": "nobody", "pin": "00000", "image": img(51, 3)}))).await;
    assert_eq!((s, b["error"].as_str()), (StatusCode::NOT_FOUND, Some("NotFoundError")));

    let (s, _, _) = call(&app, "POST", "/api/verify", Some(json!({"subject_id": "kim", "pin": "31415", "image": "%%%"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, b, _) = call(&app, "POST", "/api/verify", Some(json!({"pin": "31415"}))).await;
    assert_eq!((s, b["schema_version"].as_u64()), (StatusCode::BAD_REQUEST, Some(1)));

    let (s, b, _) = call(&app, "POST", "/api/identify", Some(json!({"image": img(51, 4), "door_id": "east"}))).await;
    assert_eq!((s, b["subject_id"].as_str()), (StatusCode::OK, Some("kim")));

    let (_, b, _) = call(&app, "GET", "/api/events?since=0", None).await;
    let events = b["events"].as_array().unwrap();
    let kinds: Vec<&str> = events.iter().map(|e| e["kind"].as_str().unwrap()).collect();
    assert_eq!(
        kinds,
        ["enroll", "verify_accept", "verify_reject", "alert", "verify_reject", "identify_hit"]
    );
    assert_eq!(b["last_id"].as_u64(), Some(6));
    let (_, b, _) = call(&app, "GET", "/api/events?since=4", None).await;
    assert_eq!(b["events"].as_array().unwrap().len(), 2);

    let (_, b, _) = call(&app, "GET", "/api/alerts", None).await;
    assert_eq!(b["alerts"].as_array().unwrap().len(), 1);
    let (s, b, _) = call(&app, "POST", "/api/alerts/4/ack", None).await;
    assert_eq!((s, b["acknowledged"].as_bool(), b["newly_acknowledged"].as_bool()), (StatusCode::OK, Some(true), Some(true)));
    let (_, b, _) = call(&app, "GET", "/api/alerts", None).await;
    assert!(b["alerts"].as_array().unwrap().is_empty());
    let (s, _, _) = call(&app, "POST", "/api/alerts/2/ack", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (from, to) = (1_760_000_000_000i64, 1_760_000_000_000i64 + 3_600_000);
    let (s, b, _) = call(&app, "GET", &format!("/api/reports?from={from}&to={to}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b["total_events"].as_u64(), Some(6));
    assert_eq!(b["per_door"]["east"]["identify_hit"].as_u64(), Some(1));
    assert_eq!(b["schema_version"].as_u64(), Some(1));
    let (_, _, csv) = call(&app, "GET", &format!("/api/reports?from={from}&to={to}&format=csv"), None).await;
    assert!(csv.starts_with("section,key,metric,value\n"));
    let (s, b, _) = call(&app, "GET", &format!("/api/reports?from={to}&to={from}"), None).await;
    assert_eq!((s, b["error"].as_str()), (StatusCode::BAD_REQUEST, Some("PeriodError")));

    // only the accept and the identification carry a fused score
    let (s, b, _) = call(&app, "GET", "/api/spc?window=3", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(b["chart"]["points"].as_array().unwrap().len(), 2);
    let (s, b, _) = call(&app, "GET", "/api/spc?window=1", None).await;
    assert_eq!((s, b["error"].as_str()), (StatusCode::BAD_REQUEST, Some("WindowError")));

    let (_, b, _) = call(&app, "GET", "/api/subjects", None).await;
    assert_eq!(b["subjects"][0]["subject_id"].as_str(), Some("kim"));
    assert_eq!(b["subjects"][0]["templates"].as_u64(), Some(3));
    assert!(b["subjects"][0].get("pin_hash").is_none());
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("cli.iris");
    let weights = dir.path().join("model.json");
    TunedModel::untrained(PipelineConfig::default()).save(&weights).unwrap();
    let mut paths = Vec::new();
    for c in 0..4 {
        let p = dir.path().join(format!("eye{c}.ppm"));
        ppm::write_ppm(&p, &eye(61, c)).unwrap();
        paths.push(p);
    }
    let iris = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_iris"))
            .args(args)
            .env("IRIS_STORE_PATH", &store)
            .env("IRIS_WEIGHTS_PATH", &weights)
            .output()
            .unwrap()
    };
    let p = |i: usize| paths[i].to_str().unwrap().to_string();

    let out = iris(&["enroll", "--subject", "eve", "--name", "Eve", "--pin", "13579", &p(0), &p(1), &p(2)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let out = iris(&["verify", "--subject", "eve", "--pin", "13579", "--image", &p(3)]);
    assert_eq!(out.status.code(), Some(0));
    let decision: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(decision["accepted"].as_bool(), Some(true));

    let out = iris(&["verify", "--subject", "eve", "--pin", "13578", "--image", &p(3)]);
    assert_eq!(out.status.code(), Some(1));

    let out = iris(&["verify", "--subject", "eve", "--pin", "1357", "--image", &p(3)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("PinFormatError"));

    let out = iris(&["identify", "--image", &p(3)]);
    assert_eq!(out.status.code(), Some(0));

    let out = iris(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));

    let out = iris(&["report", "--from", "2000-01-01T00:00:00Z", "--to", "2100-01-01T00:00:00Z"]);
    assert_eq!(out.status.code(), Some(2), "a century of hourly bins is refused");
    let now = Timestamp::now();
    let (from, to) = (now.plus_secs(-3600).millis().to_string(), now.plus_secs(3600).millis().to_string());
    let out = iris(&["report", "--from", &from, "--to", &to, "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("total,,verify_accept,1"));

    // state lives beside the store file
    let paths = SystemPaths::beside_store(&store);
    assert!(paths.events.exists());

    std::fs::write(&weights, "{}").unwrap();
    let out = iris(&["identify", "--image", &p(3)]);
    assert_eq!(out.status.code(), Some(3));
}
