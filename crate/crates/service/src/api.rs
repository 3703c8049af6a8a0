use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use poolal_core::harness::{ExperimentConfig, RoundRecord};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::session::{Advance, LabelSubmission, Mode, PendingView, SessionSummary, Submitted};
use crate::store::SessionStore;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    #[serde(default)]
    pub config: ExperimentConfig,
    #[serde(default)]
    pub mode: Mode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateResponse {
    pub session_id: String,
    pub mode: Mode,
    /// The round-0 record.
    pub record: RoundRecord,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelsRequest {
    pub labels: Vec<LabelSubmission>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveResponse {
    pub records: Vec<RoundRecord>,
}

type Shared = Arc<SessionStore>;

pub fn router(store: Shared) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/advance", post(advance))
        .route("/sessions/{id}/labels", post(labels))
        .route("/sessions/{id}/curve", get(curve))
        .route("/sessions/{id}/pending", get(pending))
        .route("/sessions/{id}/config", get(config))
        .with_state(store)
}

/// Parses the body ourselves so malformed JSON gets the standard error shape.
fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

async fn create(State(store): State<Shared>, body: Bytes) -> Result<(StatusCode, Json<CreateResponse>), ApiError> {
    let req: CreateRequest = if body.iter().all(u8::is_ascii_whitespace) {
        CreateRequest::default()
    } else {
        parse(&body)?
    };
    let view = store.create(req.config, req.mode).await?;
    tracing::info!(id = %view.summary.session_id, mode = ?view.summary.mode, "session created");
    Ok((
        StatusCode::CREATED,
        Json(CreateResponse {
            session_id: view.summary.session_id.clone(),
            mode: view.summary.mode,
            record: view.records[0].clone(),
        }),
    ))
}

async fn advance(State(store): State<Shared>, Path(id): Path<String>) -> Result<Json<Advance>, ApiError> {
    Ok(Json(store.advance(&id).await?))
}

async fn labels(State(store): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Json<Submitted>, ApiError> {
    let req: LabelsRequest = parse(&body)?;
    Ok(Json(store.submit(&id, req.labels).await?))
}

async fn curve(State(store): State<Shared>, Path(id): Path<String>) -> Result<Json<CurveResponse>, ApiError> {
    Ok(Json(CurveResponse {
        records: store.view(&id)?.records.clone(),
    }))
}

async fn pending(State(store): State<Shared>, Path(id): Path<String>) -> Result<Json<PendingView>, ApiError> {
    Ok(Json(store.view(&id)?.pending.clone()))
}

async fn config(State(store): State<Shared>, Path(id): Path<String>) -> Result<Json<SessionSummary>, ApiError> {
    Ok(Json(store.view(&id)?.summary.clone()))
}
