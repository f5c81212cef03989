//! `/v1` JSON routes.
//!
//! | route | body | response |
//! |---|---|---|
//! | `POST /v1/session` | none | `201 {"session_id"}` |
//! | `POST /v1/session/{id}/turn` | `{"text", "speaker"?}` | `{"turn_index"}` |
//! | `GET /v1/session/{id}` | | `{"id","turns":[{"speaker","text"}],"created_ms","updated_ms"}` |
//! | `GET /v1/session/{id}/summary` | | session summary of logged events |
//! | `POST /v1/ae` | `{"session_id"?, "abbreviation":[{"kind","surface"}], "k"?}` | `{"candidates":[{"text","score"}]}` |
//! | `POST /v1/fillmask` | `{"session_id"?, "phrase_words":[..], "masked_index", "k"?}` | `{"candidates":[word]}` |
//! | `POST /v1/log` | `{"session_id", "events":[..]}` | `{"accepted", "summary"}` |
//! | `GET /healthz` | | `{"status":"ok"}` |
//!
//! Errors are `{"error": message, "index"?: n}` with 400 for invalid input,
//! 404 for unknown sessions, 502 for backend failures and 504 on timeout.

use std::sync::Arc;
use std::time::Duration;

use abbrex_core::abbrev::{AbbrevError, AbbrevToken, Abbreviation};
use abbrex_core::expand::{dedup_candidates, candidate_matches, AeRequest, FmRequest, PhraseCandidate, PredictError, Predictor};
use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{Any, CorsLayer};
use uuid::Uuid;

use crate::session::{SessionError, SessionStore};
use crate::summary::{summarize_session, LogEvent, SessionSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub max_context_turns: usize,
    pub default_k: usize,
    pub max_k: usize,
    pub request_timeout_ms: u64,
    /// Allowed UI origin; any origin when unset.
    pub cors_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            max_context_turns: 5,
            default_k: 5,
            max_k: 20,
            request_timeout_ms: 15_000,
            cors_origin: None,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub sessions: Arc<SessionStore>,
    pub predictor: Arc<dyn Predictor>,
    pub config: Arc<ServiceConfig>,
}

impl AppState {
    pub fn new(predictor: Arc<dyn Predictor>, sessions: SessionStore, config: ServiceConfig) -> Self {
        AppState { sessions: Arc::new(sessions), predictor, config: Arc::new(config) }
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
    pub index: Option<usize>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into(), index: None }
    }

    fn bad(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"error": self.message});
        if let Some(i) = self.index {
            body["index"] = json!(i);
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match e {
            SessionError::NotFound(_) => StatusCode::NOT_FOUND,
            SessionError::Io(_) | SessionError::Corrupt { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<PredictError> for ApiError {
    fn from(e: PredictError) -> Self {
        let status = match e {
            PredictError::Backend(_) | PredictError::Malformed(_) => StatusCode::BAD_GATEWAY,
            PredictError::Timeout => StatusCode::GATEWAY_TIMEOUT,
            _ => StatusCode::BAD_REQUEST,
        };
        let index = match &e {
            PredictError::Abbrev(AbbrevError::InvalidToken { index, .. }) => Some(*index),
            PredictError::MaskOutOfRange { index, .. } => Some(*index),
            _ => None,
        };
        ApiError { status, message: e.to_string(), index }
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad(format!("invalid JSON body: {e}")))
}

fn session_id(raw: &str) -> Result<Uuid, ApiError> {
    Uuid::parse_str(raw).map_err(|_| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {raw}")))
}

fn resolve_k(config: &ServiceConfig, k: Option<usize>) -> Result<usize, ApiError> {
    let k = k.unwrap_or(config.default_k);
    if k < 1 || k > config.max_k {
        return Err(ApiError::bad(format!("k must be between 1 and {}", config.max_k)));
    }
    Ok(k)
}

fn context_for(state: &AppState, id: Option<Uuid>) -> Result<Vec<String>, ApiError> {
    match id {
        Some(id) => Ok(state.sessions.context_window(id, state.config.max_context_turns)?),
        None => Ok(Vec::new()),
    }
}

/// Runs a predictor call off the async workers, bounded by the request timeout.
async fn predict<T, F>(state: &AppState, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&dyn Predictor) -> Result<T, PredictError> + Send + 'static,
{
    let predictor = state.predictor.clone();
    let task = tokio::task::spawn_blocking(move || f(predictor.as_ref()));
    match tokio::time::timeout(Duration::from_millis(state.config.request_timeout_ms), task).await {
        Err(_) => Err(ApiError::new(StatusCode::GATEWAY_TIMEOUT, "predictor timed out")),
        Ok(Err(e)) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("predictor task failed: {e}"))),
        Ok(Ok(r)) => r.map_err(ApiError::from),
    }
}

fn parse_abbreviation(value: &Value) -> Result<Abbreviation, ApiError> {
    let items = value.as_array().ok_or_else(|| ApiError::bad("abbreviation must be an array of tokens"))?;
    let tokens = items
        .iter()
        .enumerate()
        .map(|(index, v)| {
            serde_json::from_value::<AbbrevToken>(v.clone()).map_err(|e| ApiError {
                status: StatusCode::BAD_REQUEST,
                message: format!("invalid abbreviation token at index {index}: {e}"),
                index: Some(index),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Abbreviation::new(tokens).map_err(|e| ApiError::from(PredictError::from(e)))
}

async fn healthz() -> Json<Value> {
    Json(json!({"status": "ok"}))
}

async fn create_session(State(state): State<AppState>) -> Result<impl IntoResponse, ApiError> {
    let s = state.sessions.create()?;
    Ok((StatusCode::CREATED, Json(json!({"session_id": s.id}))))
}

#[derive(Deserialize)]
struct TurnBody {
    text: String,
    speaker: Option<u8>,
}

async fn commit_turn(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let id = session_id(&id)?;
    let body: TurnBody = parse_body(&body)?;
    let index = state.sessions.commit_turn(id, &body.text, body.speaker)?;
    Ok(Json(json!({"turn_index": index})))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let s = state.sessions.get(session_id(&id)?)?;
    Ok(Json(serde_json::to_value(s).unwrap_or_default()))
}

async fn session_summary(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionSummary>, ApiError> {
    let s = state.sessions.get(session_id(&id)?)?;
    summarize_session(&s.events).map(Json).map_err(|e| ApiError::bad(e.to_string()))
}

#[derive(Deserialize)]
struct AeBody {
    session_id: Option<Uuid>,
    abbreviation: Value,
    k: Option<usize>,
}

#[derive(Serialize)]
struct AeResponse {
    candidates: Vec<PhraseCandidate>,
}

async fn ae(State(state): State<AppState>, body: Bytes) -> Result<Json<AeResponse>, ApiError> {
    let body: AeBody = parse_body(&body)?;
    let abbrev = parse_abbreviation(&body.abbreviation)?;
    let k = resolve_k(&state.config, body.k)?;
    let context = context_for(&state, body.session_id)?;
    let request = AeRequest::new(context, abbrev, k);
    let candidates = predict(&state, move |p| {
        let cands = p.keyword_ae(&request)?;
        // Chips must align one-to-one with words, so misaligned output is dropped.
        let aligned = cands.into_iter().filter(|c| candidate_matches(&c.text, &request.abbrev)).collect();
        Ok(dedup_candidates(aligned, request.k))
    })
    .await?;
    Ok(Json(AeResponse { candidates }))
}

#[derive(Deserialize)]
struct FmBody {
    session_id: Option<Uuid>,
    phrase_words: Vec<String>,
    masked_index: usize,
    k: Option<usize>,
}

async fn fillmask(State(state): State<AppState>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let body: FmBody = parse_body(&body)?;
    let k = resolve_k(&state.config, body.k)?;
    let context = context_for(&state, body.session_id)?;
    let request = FmRequest::for_word(context, body.phrase_words, body.masked_index, k)?;
    let initial = request.initial;
    let words = predict(&state, move |p| p.fill_mask(&request)).await?;
    let mut seen = std::collections::HashSet::new();
    let words: Vec<String> = words
        .into_iter()
        .map(|w| w.word.to_lowercase())
        .filter(|w| w.starts_with(initial) && seen.insert(w.clone()))
        .take(k)
        .collect();
    Ok(Json(json!({"candidates": words})))
}

#[derive(Deserialize)]
struct LogBody {
    session_id: Uuid,
    events: Vec<LogEvent>,
}

async fn log(State(state): State<AppState>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let body: LogBody = parse_body(&body)?;
    let accepted = body.events.len();
    let all = state.sessions.append_events(body.session_id, body.events)?;
    let summary = summarize_session(&all).map_err(|e| ApiError::bad(e.to_string()))?;
    Ok(Json(json!({"accepted": accepted, "summary": summary})))
}

fn cors(config: &ServiceConfig) -> CorsLayer {
    let layer = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers([header::CONTENT_TYPE]);
    match config.cors_origin.as_deref().and_then(|o| HeaderValue::from_str(o).ok()) {
        Some(origin) => layer.allow_origin(origin),
        None => layer.allow_origin(Any),
    }
}

pub fn router(state: AppState) -> Router {
    let cors = cors(&state.config);
    Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/session", post(create_session))
        .route("/v1/session/{id}", get(get_session))
        .route("/v1/session/{id}/turn", post(commit_turn))
        .route("/v1/session/{id}/summary", get(session_summary))
        .route("/v1/ae", post(ae))
        .route("/v1/fillmask", post(fillmask))
        .route("/v1/log", post(log))
        .layer(cors)
        .with_state(state)
}
