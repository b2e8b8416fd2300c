//! HTTP search API over one shared, immutable engine.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use qrag_core::engine::{Engine, RetrieveOptions};
use qrag_core::quantum::FusionMode;
use qrag_core::Error;
use serde::Deserialize;
use serde_json::json;

#[derive(Debug, Deserialize)]
pub struct SearchRequest {
    pub query: String,
    #[serde(default)]
    pub mode: Option<String>,
    #[serde(default)]
    pub k: Option<usize>,
}

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

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e.root() {
            Error::EmptyQuery
            | Error::UnknownMode(_)
            | Error::Config(_)
            | Error::InvalidWeights(..)
            | Error::DimensionMismatch { .. }
            | Error::ZeroVector
            | Error::NonFinite(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/search", post(search))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not found") })
        .with_state(engine)
}

async fn health(State(engine): State<Arc<Engine>>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "chunks": engine.chunks().len() }))
}

async fn search(
    State(engine): State<Arc<Engine>>,
    body: Result<Json<SearchRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::new(e.status(), e.body_text()))?;
    let mode = req.mode.as_deref().map(str::parse::<FusionMode>).transpose()?;
    if req.k == Some(0) {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "k must be >= 1"));
    }
    let opts = RetrieveOptions {
        mode,
        k: req.k,
        query_vector: None,
    };
    // retrieval is CPU-bound; keep it off the async workers
    let response = tokio::task::spawn_blocking(move || engine.retrieve(&req.query, &opts))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(response).into_response())
}

pub async fn serve(engine: Arc<Engine>, addr: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, chunks = engine.chunks().len(), "serving");
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
