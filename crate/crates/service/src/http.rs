//! The `/v1` HTTP API. Every body is a JSON document carrying `"version": 1`.
//!
//! | Method | Path | Request | Response |
//! |---|---|---|---|
//! | POST | `/v1/sessions` | `{profile, config?}` | `201 {session}` |
//! | POST | `/v1/sessions/{id}/utterances` | `{text}` | `{outcome}` |
//! | GET | `/v1/sessions/{id}` | | `{session}` |
//! | GET | `/v1/sessions/{id}/history` | | `{session_id, status, clock, history}` |
//! | DELETE | `/v1/sessions/{id}` | | `{deleted, session}` |
//!
//! Errors are `{version, error: {code, message}}` with codes `unknown_session`
//! (404), `session_not_active` (409), `bad_request` (400) and `internal` (500).

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mission_core::engine::EngineError;
use mission_core::model::{SessionConfig, UserProfile};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{ServiceError, SessionService};

pub const API_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    #[serde(default)]
    pub version: Option<u32>,
    pub profile: UserProfile,
    #[serde(default)]
    pub config: Option<SessionConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtteranceRequest {
    #[serde(default)]
    pub version: Option<u32>,
    pub text: String,
}

pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self { status: StatusCode::BAD_REQUEST, code: "bad_request", message: message.into() }
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let (status, code) = match &e {
            ServiceError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            ServiceError::SessionNotActive { .. } => (StatusCode::CONFLICT, "session_not_active"),
            ServiceError::Config(_) | ServiceError::Engine(EngineError::EmptyUtterance | EngineError::Model(_)) => {
                (StatusCode::BAD_REQUEST, "bad_request")
            }
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self { status, code, message: e.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "version": API_VERSION, "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes, version: impl Fn(&T) -> Option<u32>) -> Result<T, ApiError> {
    let req: T = serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request: {e}")))?;
    match version(&req) {
        Some(v) if v != API_VERSION => Err(ApiError::bad_request(format!("unsupported API version {v}"))),
        _ => Ok(req),
    }
}

fn ok(status: StatusCode, mut body: Value) -> Response {
    body["version"] = json!(API_VERSION);
    (status, Json(body)).into_response()
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, ApiError> {
    serde_json::to_value(v).map_err(|e| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        code: "internal",
        message: e.to_string(),
    })
}

type Svc = Arc<SessionService>;

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError { status: StatusCode::INTERNAL_SERVER_ERROR, code: "internal", message: e.to_string() })?
        .map_err(ApiError::from)
}

async fn create_session(State(svc): State<Svc>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSessionRequest = parse_body(&body, |r: &CreateSessionRequest| r.version)?;
    let view = blocking(move || {
        let s = svc.create_session(req.profile, req.config)?;
        Ok(crate::service::SessionView::of(&s))
    })
    .await?;
    Ok(ok(StatusCode::CREATED, json!({ "session": to_value(&view)? })))
}

async fn post_utterance(State(svc): State<Svc>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let req: UtteranceRequest = parse_body(&body, |r: &UtteranceRequest| r.version)?;
    let outcome = blocking(move || svc.post_utterance(&id, &req.text)).await?;
    Ok(ok(StatusCode::OK, json!({ "outcome": to_value(&outcome)? })))
}

async fn get_session(State(svc): State<Svc>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let view = blocking(move || svc.view(&id)).await?;
    Ok(ok(StatusCode::OK, json!({ "session": to_value(&view)? })))
}

async fn get_history(State(svc): State<Svc>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let view = blocking(move || svc.history(&id)).await?;
    Ok(ok(StatusCode::OK, to_value(&view)?))
}

async fn delete_session(State(svc): State<Svc>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let view = blocking(move || svc.delete(&id)).await?;
    Ok(ok(StatusCode::OK, json!({ "deleted": true, "session": to_value(&view)? })))
}

pub fn router(svc: Svc) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session).delete(delete_session))
        .route("/v1/sessions/{id}/utterances", post(post_utterance))
        .route("/v1/sessions/{id}/history", get(get_history))
        .with_state(svc)
}

/// Serves the API until the process is stopped.
pub async fn serve(svc: Svc, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(svc)).await
}
