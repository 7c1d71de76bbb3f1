// Drive the HTTP API in-process (no socket): enroll, verify, then read
// the event feed, report and subject list the way the console does.

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use iris_core::dispatcher::{Dispatcher, DispatcherConfig};
use iris_core::gateway::http::{encode_image, router};
use iris_core::gateway::{IrisSystem, TunedModel};
use iris_core::imaging::{generate_synthetic_eye, EyeParams};
use iris_core::pipeline::PipelineConfig;
use iris_core::store::Store;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or(Body::empty(), |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::main(flavor = "current_thread")]
async fn main() {
    let dir = tempfile::tempdir().unwrap();
    let sys = IrisSystem::new(
        Store::open(dir.path().join("site.iris")).unwrap(),
        Dispatcher::open(dir.path().join("events.ndjson"), DispatcherConfig::default()).unwrap(),
        TunedModel::untrained(PipelineConfig::default()),
    )
    .unwrap();
    let app = router(Arc::new(sys));

    let eye = |capture| {
        let p = EyeParams {
            texture_seed: 99,
            capture_seed: capture,
            noise_sigma: 3.0,
            ..EyeParams::default()
        };
        encode_image(&generate_synthetic_eye(&p).unwrap())
    };
    let (status, body) = call(
        &app,
        "POST",
        "/api/enroll",
        Some(json!({"subject_id": "grace", "display_name": "Grace H.", "pin": "77123",
                    "images": [eye(0), eye(1), eye(2)]})),
    )
    .await;
    println!("POST /api/enroll -> {status} {body}");

    let (status, body) = call(
        &app,
        "POST",
        "/api/verify",
        Some(json!({"subject_id": "grace", "pin": "77123", "image": eye(3), "door_id": "lobby"})),
    )
    .await;
    println!("POST /api/verify -> {status} {body}");

    let (status, body) = call(&app, "POST", "/api/verify", Some(json!({"subject_id": "grace", "pin": "771", "image": eye(3)}))).await;
    println!("POST /api/verify (short code) -> {status} {body}");

    let (_, body) = call(&app, "GET", "/api/events?since=0", None).await;
    println!("GET /api/events -> last_id {} kinds {:?}", body["last_id"], body["events"].as_array().unwrap().iter().map(|e| e["kind"].clone()).collect::<Vec<_>>());

    let now = iris_core::time::Timestamp::now();
    let uri = format!("/api/reports?from={}&to={}", now.plus_secs(-3600).millis(), now.plus_secs(60).millis());
    let (_, body) = call(&app, "GET", &uri, None).await;
    println!("GET /api/reports -> totals {}", body["totals"]);

    let (_, body) = call(&app, "GET", "/api/subjects", None).await;
    println!("GET /api/subjects -> {}", body["subjects"]);
}
