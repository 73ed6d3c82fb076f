//! HTTP inference service over one immutable loaded artifact.
//!
//! | route | response |
//! |-------|----------|
//! | `POST /predict` with `{"text": "..."}` | [`PredictionResponse`] |
//! | `GET /taxonomy` | `{category: [emotion, ...], ...}` |
//! | `GET /hierarchy` | dendrogram JSON, or 404 when none is bundled |
//! | `GET /health` | `{"status": "ok", "model": ModelInfo}` |
//!
//! Errors are `{"error": message}` with status 400 (malformed body), 413
//! (text longer than the configured byte limit) or 422 (text the model
//! cannot score, such as an empty text under an embedding model).

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use emobench::artifact::{CategoryScore, EmotionScore, ModelArtifact, ARTIFACT_VERSION};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub const DEFAULT_MAX_TEXT_BYTES: usize = 16 * 1024;
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
/// Overrides the default bind address; an explicit `--bind` wins.
pub const BIND_ENV: &str = "EMOBENCH_BIND";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub family: String,
    pub features: String,
    pub num_labels: usize,
    pub seed: u64,
    pub data_fingerprint: String,
    pub created_at: String,
    pub format_version: u32,
    pub has_hierarchy: bool,
}

impl ModelInfo {
    pub fn of(artifact: &ModelArtifact) -> Self {
        Self {
            family: artifact.learner.family().to_string(),
            features: artifact.features.kind().to_string(),
            num_labels: artifact.taxonomy.len(),
            seed: artifact.metadata.seed,
            data_fingerprint: artifact.metadata.data_fingerprint.clone(),
            created_at: artifact.metadata.created_at.clone(),
            format_version: ARTIFACT_VERSION,
            has_hierarchy: artifact.hierarchy.is_some(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResponse {
    pub emotions: Vec<EmotionScore>,
    pub categories: Vec<CategoryScore>,
    pub decided: Vec<String>,
    pub model: ModelInfo,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictRequest {
    text: String,
}

pub struct AppState {
    artifact: ModelArtifact,
    info: ModelInfo,
    max_text_bytes: usize,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

/// Runs the prediction pipeline, the same one `predict` uses on stdin.
pub fn predict_response(
    artifact: &ModelArtifact,
    info: &ModelInfo,
    text: &str,
) -> Result<PredictionResponse, emobench::Error> {
    let p = artifact.predict(text)?;
    Ok(PredictionResponse {
        emotions: p.emotions,
        categories: p.categories,
        decided: p.decided,
        model: info.clone(),
    })
}

async fn predict(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<PredictionResponse>, ApiError> {
    let req: PredictRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("malformed request body: {e}")))?;
    if req.text.len() > state.max_text_bytes {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("text is {} bytes, the limit is {}", req.text.len(), state.max_text_bytes),
        ));
    }
    match predict_response(&state.artifact, &state.info, &req.text) {
        Ok(r) => Ok(Json(r)),
        Err(e @ emobench::Error::EmptySequence) => Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("{e}: the text has no tokens to embed"),
        )),
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())),
    }
}

async fn taxonomy(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(state.artifact.taxonomy.to_json_value())
}

async fn hierarchy(State(state): State<Arc<AppState>>) -> Result<Json<serde_json::Value>, ApiError> {
    match &state.artifact.hierarchy {
        Some(d) => Ok(Json(d.to_json())),
        None => Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "this model has no bundled hierarchy; run `emobench hierarchy --attach` to add one",
        )),
    }
}

async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "model": state.info }))
}

pub fn router(artifact: ModelArtifact, max_text_bytes: usize) -> Router {
    let info = ModelInfo::of(&artifact);
    let state = Arc::new(AppState {
        artifact,
        info,
        max_text_bytes,
    });
    // JSON escaping can expand text up to six-fold.
    let body_limit = max_text_bytes.saturating_mul(6).saturating_add(1024);
    Router::new()
        .route("/predict", post(predict))
        .route("/taxonomy", get(taxonomy))
        .route("/hierarchy", get(hierarchy))
        .route("/health", get(health))
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(state)
}

/// `--bind`, else `EMOBENCH_BIND`, else [`DEFAULT_BIND`].
pub fn resolve_bind(flag: Option<&str>) -> Result<SocketAddr, String> {
    let env = std::env::var(BIND_ENV).ok();
    let raw = flag.or(env.as_deref()).unwrap_or(DEFAULT_BIND);
    raw.parse().map_err(|e| format!("invalid bind address '{raw}': {e}"))
}

pub async fn serve(artifact: ModelArtifact, addr: SocketAddr, max_text_bytes: usize) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(address = %listener.local_addr()?, "serving");
    axum::serve(listener, router(artifact, max_text_bytes))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
