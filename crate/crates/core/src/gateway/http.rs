//! JSON-over-HTTP surface used by the supervisor console.
//!
//! Images travel as base64-encoded binary PPM. Every response body,
//! errors included, carries `schema_version`.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ErrorClass, GatewayError, IrisSystem, VerifyRequest, API_SCHEMA_VERSION};
use crate::dispatcher::{ControlChart, Event};
use crate::imaging::{ppm, RgbImage};
use crate::time::Timestamp;

const DEFAULT_SPC_WINDOW: usize = 20;

pub struct ApiError(GatewayError);

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.0.class() {
            ErrorClass::Usage => StatusCode::BAD_REQUEST,
            ErrorClass::NotFound => StatusCode::NOT_FOUND,
            ErrorClass::Conflict => StatusCode::CONFLICT,
            ErrorClass::Unprocessable => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorClass::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!("{}", self.0);
        }
        let body = json!({
            "schema_version": API_SCHEMA_VERSION,
            "error": self.0.kind(),
            "message": self.0.to_string(),
        });
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError(GatewayError::Invalid(e.body_text())))
}

pub fn decode_image(b64: &str) -> Result<RgbImage, GatewayError> {
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(b64.trim())
        .map_err(|e| GatewayError::Invalid(format!("image is not valid base64: {e}")))?;
    Ok(ppm::decode_ppm(&bytes)?)
}

pub fn encode_image(img: &RgbImage) -> String {
    base64::engine::general_purpose::STANDARD.encode(ppm::encode_ppm(img))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, GatewayError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(GatewayError::Invalid(format!("worker failed: {e}"))))?
        .map_err(ApiError)
}

#[derive(Debug, Deserialize)]
pub struct EnrollBody {
    pub subject_id: String,
    pub display_name: String,
    pub pin: String,
    pub images: Vec<String>,
}

#[derive(Debug, Deserialize)]
pub struct VerifyBody {
    pub subject_id: String,
    pub pin: String,
    pub image: String,
    #[serde(default)]
    pub door_id: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct IdentifyBody {
    pub image: String,
    #[serde(default)]
    pub door_id: Option<String>,
}

async fn enroll(
    State(sys): State<Arc<IrisSystem>>,
    payload: Result<Json<EnrollBody>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let b = body(payload)?;
    let result = blocking(move || {
        let images = b.images.iter().map(|s| decode_image(s)).collect::<Result<Vec<_>, _>>()?;
        sys.enroll(&b.subject_id, &b.display_name, &b.pin, &images)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(result)))
}

async fn verify(
    State(sys): State<Arc<IrisSystem>>,
    payload: Result<Json<VerifyBody>, JsonRejection>,
) -> ApiResult<super::Decision> {
    let b = body(payload)?;
    let decision = blocking(move || {
        let image = decode_image(&b.image)?;
        sys.run_verify(&VerifyRequest {
            subject_id: b.subject_id,
            pin: b.pin,
            image,
            door_id: b.door_id,
        })
    })
    .await?;
    Ok(Json(decision))
}

async fn identify(
    State(sys): State<Arc<IrisSystem>>,
    payload: Result<Json<IdentifyBody>, JsonRejection>,
) -> ApiResult<super::IdentifyResult> {
    let b = body(payload)?;
    let result = blocking(move || {
        let image = decode_image(&b.image)?;
        sys.run_identify(&image, b.door_id.as_deref())
    })
    .await?;
    Ok(Json(result))
}

#[derive(Debug, Deserialize)]
pub struct EventsQuery {
    #[serde(default)]
    pub since: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EventsPage {
    pub schema_version: u32,
    /// Highest event id in the log (0 when empty); poll again with `since` set to it.
    pub last_id: u64,
    pub events: Vec<Event>,
}

async fn events(State(sys): State<Arc<IrisSystem>>, Query(q): Query<EventsQuery>) -> Json<EventsPage> {
    let d = sys.dispatcher();
    Json(EventsPage {
        schema_version: API_SCHEMA_VERSION,
        last_id: d.next_event_id() - 1,
        events: d.events_since(q.since).to_vec(),
    })
}

#[derive(Debug, Deserialize)]
pub struct ReportQuery {
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub format: Option<String>,
}

fn parse_time(field: &str, text: &str) -> Result<Timestamp, ApiError> {
    Timestamp::parse(text).ok_or_else(|| ApiError(GatewayError::Invalid(format!("{field}: cannot parse {text:?}"))))
}

async fn reports(State(sys): State<Arc<IrisSystem>>, Query(q): Query<ReportQuery>) -> Result<Response, ApiError> {
    let from = parse_time("from", &q.from)?;
    let to = parse_time("to", &q.to)?;
    let report = sys.dispatcher().build_report(from, to).map_err(GatewayError::from)?;
    match q.format.as_deref() {
        None | Some("json") => Ok(Json(report).into_response()),
        Some("csv") => Ok(([(header::CONTENT_TYPE, "text/csv")], report.to_csv()).into_response()),
        Some(other) => Err(ApiError(GatewayError::Invalid(format!("unknown format {other:?}")))),
    }
}

#[derive(Debug, Deserialize)]
pub struct SpcQuery {
    #[serde(default)]
    pub window: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SpcResponse {
    pub schema_version: u32,
    pub chart: ControlChart,
}

async fn spc(State(sys): State<Arc<IrisSystem>>, Query(q): Query<SpcQuery>) -> ApiResult<SpcResponse> {
    let chart = sys
        .dispatcher()
        .spc(q.window.unwrap_or(DEFAULT_SPC_WINDOW))
        .map_err(GatewayError::from)?;
    Ok(Json(SpcResponse {
        schema_version: API_SCHEMA_VERSION,
        chart,
    }))
}

async fn alerts(State(sys): State<Arc<IrisSystem>>) -> Json<serde_json::Value> {
    let d = sys.dispatcher();
    let open: Vec<&Event> = d.unacknowledged_alerts().collect();
    Json(json!({ "schema_version": API_SCHEMA_VERSION, "alerts": open }))
}

async fn ack(State(sys): State<Arc<IrisSystem>>, Path(id): Path<u64>) -> ApiResult<serde_json::Value> {
    let newly = sys.dispatcher().acknowledge(id).map_err(GatewayError::from)?;
    Ok(Json(json!({
        "schema_version": API_SCHEMA_VERSION,
        "alert_id": id,
        "acknowledged": true,
        "newly_acknowledged": newly,
    })))
}

async fn subjects(State(sys): State<Arc<IrisSystem>>) -> Json<serde_json::Value> {
    Json(json!({ "schema_version": API_SCHEMA_VERSION, "subjects": sys.subjects() }))
}

pub fn router(sys: Arc<IrisSystem>) -> Router {
    Router::new()
        .route("/api/enroll", post(enroll))
        .route("/api/verify", post(verify))
        .route("/api/identify", post(identify))
        .route("/api/events", get(events))
        .route("/api/reports", get(reports))
        .route("/api/spc", get(spc))
        .route("/api/alerts", get(alerts))
        .route("/api/alerts/{id}/ack", post(ack))
        .route("/api/subjects", get(subjects))
        .with_state(sys)
}

/// Serves until ctrl-c.
pub async fn serve(sys: Arc<IrisSystem>, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(sys))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
