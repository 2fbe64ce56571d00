//! HTTP front for the span review queue.
//!
//! ```text
//! GET  /api/queue?limit=N
//! GET  /api/examples/{id}
//! POST /api/examples/{id}/decision   {action, adjusted_span?, reviewer}
//! GET  /api/stats
//! ```
//!
//! Everything else is served from an optional static directory (the review
//! UI build).

use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::{Deserialize, Serialize};
use spoilkit_core::jsonl::{self, JsonlError};
use spoilkit_core::review::{DecisionRequest, QueueStats, ReviewDecision, ReviewError, ReviewStore};
use spoilkit_core::spanlab::LabeledExample;
use tower_http::services::ServeDir;

pub const DEFAULT_QUEUE_LIMIT: usize = 20;
pub const MAX_QUEUE_LIMIT: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("labeled file: {0}")]
    Labeled(#[from] JsonlError),
    #[error(transparent)]
    Review(#[from] ReviewError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: io::Error },
    #[error("server error: {0}")]
    Io(#[from] io::Error),
}

/// Loads the labeled examples and replays the decision log over them.
pub fn open_store(labeled: &Path, log: &Path) -> Result<ReviewStore, ServerError> {
    let examples: Vec<LabeledExample> = jsonl::read_jsonl(labeled)?;
    Ok(ReviewStore::open(examples, log)?)
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

struct ApiError(StatusCode, String);

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        let status = match e {
            ReviewError::UnknownId(_) => StatusCode::NOT_FOUND,
            ReviewError::InvalidSpan { .. } | ReviewError::InvalidDecision(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ReviewError::Io { .. } | ReviewError::CorruptLog { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: self.1 })).into_response()
    }
}

#[derive(Deserialize)]
struct QueueParams {
    limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionResponse {
    pub decision: ReviewDecision,
    pub stats: QueueStats,
}

async fn queue(State(store): State<Arc<ReviewStore>>, Query(params): Query<QueueParams>) -> impl IntoResponse {
    let limit = params.limit.unwrap_or(DEFAULT_QUEUE_LIMIT).min(MAX_QUEUE_LIMIT);
    Json(store.queue(limit))
}

async fn example(State(store): State<Arc<ReviewStore>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    match store.detail(&id) {
        Some(detail) => Ok(Json(detail).into_response()),
        None => Err(ApiError(StatusCode::NOT_FOUND, format!("no example with id {id:?}"))),
    }
}

async fn decide(
    State(store): State<Arc<ReviewStore>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<DecisionRequest>, JsonRejection>,
) -> Result<Json<DecisionResponse>, ApiError> {
    let Json(request) = body.map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.body_text()))?;
    // fsync happens inside `record`; keep it off the async workers
    let result = tokio::task::spawn_blocking(move || {
        let stats = store.record(&id, request, Utc::now())?;
        let decision = store
            .snapshot()
            .latest(&id)
            .cloned()
            .expect("decision was just recorded");
        Ok::<_, ReviewError>(DecisionResponse { decision, stats })
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(result))
}

async fn stats(State(store): State<Arc<ReviewStore>>) -> Json<QueueStats> {
    Json(store.stats())
}

pub fn router(store: Arc<ReviewStore>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/queue", get(queue))
        .route("/api/examples/{id}", get(example))
        .route("/api/examples/{id}/decision", post(decide))
        .route("/api/stats", get(stats))
        .with_state(store);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until `shutdown` resolves. In-flight requests are allowed to
/// finish; every acknowledged decision is already on disk.
pub async fn serve<F>(
    store: Arc<ReviewStore>,
    addr: SocketAddr,
    static_dir: Option<PathBuf>,
    shutdown: F,
) -> Result<(), ServerError>
where
    F: Future<Output = ()> + Send + 'static,
{
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServerError::Bind { addr, source })?;
    tracing::info!("review server listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store, static_dir))
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}

/// Resolves on Ctrl-C.
pub async fn ctrl_c() {
    let _ = tokio::signal::ctrl_c().await;
}
