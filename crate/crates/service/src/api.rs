//! HTTP routes.

use std::sync::Arc;
use std::time::Instant;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Request, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Extension, Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use tosqa_core::store::{platform_id_from_url, Platform, PlatformStatus, QueueSource};
use url::Url;

use crate::error::{ApiError, ErrorBody};
use crate::metrics::{summarize, MetricsSummary, QueryMetrics, SystemSample};
use crate::state::{AppState, QueryRequest, QueryResponse};
use crate::worker::WorkerStats;

/// Recent queries returned by `GET /api/metrics`.
pub const RECENT_METRICS: usize = 100;

#[derive(Debug, Clone, Copy)]
struct Received(Instant);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformStatusResponse {
    pub platform_id: String,
    pub status: PlatformStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display_name: Option<String>,
    pub last_crawled_at: Option<DateTime<Utc>>,
    pub source_urls: Vec<String>,
    pub sentence_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
}

impl PlatformStatusResponse {
    fn unindexed(platform_id: &str) -> Self {
        Self {
            platform_id: platform_id.to_owned(),
            status: PlatformStatus::Unindexed,
            display_name: None,
            last_crawled_at: None,
            source_urls: Vec::new(),
            sentence_count: 0,
            failure_reason: None,
        }
    }
}

impl From<Platform> for PlatformStatusResponse {
    fn from(p: Platform) -> Self {
        let (source_urls, sentence_count) =
            p.document.map(|d| (d.source_urls, d.sentence_count)).unwrap_or_default();
        Self {
            platform_id: p.platform_id,
            status: p.status,
            display_name: Some(p.display_name),
            last_crawled_at: p.last_crawled_at,
            source_urls,
            sentence_count,
            failure_reason: p.failure_reason,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformList {
    pub platforms: Vec<PlatformStatusResponse>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitRequest {
    pub url: String,
    #[serde(default)]
    pub display_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub platform_id: String,
    pub entry_id: u64,
    pub status: PlatformStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsResponse {
    pub total_queries: u64,
    pub summary: MetricsSummary,
    pub recent: Vec<QueryMetrics>,
    pub system: SystemSample,
    pub queue_length: usize,
    pub worker: WorkerStats,
}

pub fn router(state: Arc<AppState>) -> Router {
    let cors = cors_layer(&state.config.cors_origins);
    Router::new()
        .route("/api/health", get(health))
        .route("/api/query", post(query))
        .route("/api/platforms", get(list_platforms))
        .route("/api/platforms/{id}", get(platform_status))
        .route("/api/crawl", post(submit))
        .route("/api/metrics", get(metrics))
        .fallback(not_found)
        .layer(cors)
        .layer(middleware::from_fn(stamp_receipt))
        .with_state(state)
}

/// Any origin when `origins` is empty, otherwise exactly the listed ones.
pub fn cors_layer(origins: &[String]) -> CorsLayer {
    let layer = CorsLayer::new().allow_methods([Method::GET, Method::POST]).allow_headers(Any);
    if origins.is_empty() {
        return layer.allow_origin(Any);
    }
    let list: Vec<HeaderValue> = origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()).collect();
    layer.allow_origin(AllowOrigin::list(list))
}

async fn stamp_receipt(mut req: Request, next: Next) -> Response {
    req.extensions_mut().insert(Received(Instant::now()));
    next.run(req).await
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({"status": "ok"}))
}

async fn not_found() -> (StatusCode, Json<ErrorBody>) {
    (StatusCode::NOT_FOUND, Json(ErrorBody { code: "not_found".into(), message: "no such route".into() }))
}

async fn query(
    State(state): State<Arc<AppState>>,
    Extension(Received(received)): Extension<Received>,
    body: Result<Json<QueryRequest>, JsonRejection>,
) -> Result<Json<QueryResponse>, ApiError> {
    let Json(req) = body?;
    let response = tokio::task::spawn_blocking(move || state.answer(&req, received))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(response))
}

async fn platform_status(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Json<PlatformStatusResponse> {
    Json(state.store.platform(&id).map(Into::into).unwrap_or_else(|| PlatformStatusResponse::unindexed(&id)))
}

async fn list_platforms(State(state): State<Arc<AppState>>) -> Json<PlatformList> {
    Json(PlatformList { platforms: state.store.platforms().into_iter().map(Into::into).collect() })
}

async fn submit(
    State(state): State<Arc<AppState>>,
    body: Result<Json<SubmitRequest>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let Json(req) = body?;
    let url = Url::parse(req.url.trim())
        .ok()
        .filter(|u| matches!(u.scheme(), "http" | "https"))
        .ok_or_else(|| ApiError::InvalidUrl(req.url.clone()))?;
    let platform_id = platform_id_from_url(&url).ok_or_else(|| ApiError::InvalidUrl(req.url.clone()))?;
    let response = tokio::task::spawn_blocking(move || -> Result<SubmitResponse, ApiError> {
        if let Some(name) = req.display_name.as_deref().map(str::trim).filter(|n| !n.is_empty()) {
            state.store.register_platform(&platform_id, name, &url)?;
        }
        let entry = state.store.enqueue_crawl(&platform_id, url.as_str(), QueueSource::UserSubmission)?;
        let status = state.store.platform(&platform_id).map_or(PlatformStatus::Queued, |p| p.status);
        Ok(SubmitResponse { platform_id, entry_id: entry.entry_id, status })
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok((StatusCode::ACCEPTED, Json(response)))
}

async fn metrics(State(state): State<Arc<AppState>>) -> Json<MetricsResponse> {
    let recent = state.metrics.recent();
    let summary = summarize(&recent);
    let tail = recent[recent.len().saturating_sub(RECENT_METRICS)..].to_vec();
    Json(MetricsResponse {
        total_queries: state.metrics.total(),
        summary,
        recent: tail,
        system: state.sampler.sample(),
        queue_length: state.store.pending().len(),
        worker: state.worker.stats(),
    })
}
