//! Shared service state and the query path.

use std::sync::Arc;
use std::time::Instant;

use chrono::Utc;
use serde::{Deserialize, Serialize};
use tosqa_core::embedding::backend_from_spec;
use tosqa_core::qa::{ExternalScorer, OverlapScorer, RelevanceBackendKind, RelevanceScorer};
use tosqa_core::store::{StoreError, TosStore};
use tosqa_core::{EmbeddingError, QaEngine};

use crate::config::{ConfigError, ServiceConfig};
use crate::error::ApiError;
use crate::metrics::{ms, MetricsLog, QueryMetrics, SystemSampler};
use crate::worker::Worker;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRequest {
    pub platform_id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub platform_id: String,
    /// The retrieved statement, returned even when the gate rejects it.
    pub answer: String,
    pub sentence_id: usize,
    pub similarity: f64,
    pub relevance: f64,
    pub accepted: bool,
    /// Message to show instead of the answer when `accepted` is false.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
    pub metrics: QueryMetrics,
}

/// The QA engine described by `config`: its embedding backend, relevance
/// scorer, tau and fallback text.
pub fn engine_from_config(config: &ServiceConfig) -> Result<QaEngine, ServiceError> {
    config.validate()?;
    let embedder = backend_from_spec(&config.backend)?;
    let scorer: Arc<dyn RelevanceScorer> = match (config.relevance_backend, &config.relevance_endpoint) {
        (RelevanceBackendKind::External, Some(endpoint)) => Arc::new(ExternalScorer::new(endpoint.clone())),
        _ => Arc::new(OverlapScorer),
    };
    Ok(QaEngine::new(embedder, scorer, config.qa_config()))
}

pub struct AppState {
    pub config: ServiceConfig,
    pub store: Arc<TosStore>,
    pub engine: QaEngine,
    pub sampler: SystemSampler,
    pub metrics: MetricsLog,
    pub worker: Arc<Worker>,
}

impl std::fmt::Debug for AppState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AppState").field("config", &self.config).field("store", &self.store).finish_non_exhaustive()
    }
}

impl AppState {
    pub fn open(config: ServiceConfig) -> Result<Arc<Self>, ServiceError> {
        config.validate()?;
        let store = Arc::new(TosStore::open(&config.data_dir)?.with_default_recrawl_interval(config.recrawl_interval()));
        let engine = engine_from_config(&config)?;
        let embedder = Arc::clone(engine.embedder());
        let worker = Arc::new(Worker::new(Arc::clone(&store), embedder, config.crawl.clone(), config.crawl_concurrency));
        Ok(Arc::new(Self {
            config,
            store,
            engine,
            sampler: SystemSampler::new(),
            metrics: MetricsLog::default(),
            worker,
        }))
    }

    /// Answers from the stored index only; nothing is fetched. `received`
    /// is when the request arrived and anchors `latency_ms`.
    pub fn answer(&self, req: &QueryRequest, received: Instant) -> Result<QueryResponse, ApiError> {
        if req.question.trim().is_empty() {
            return Err(ApiError::EmptyQuestion);
        }
        let tau = req.tau.unwrap_or(self.config.tau);
        if !(0.0..=1.0).contains(&tau) {
            return Err(ApiError::InvalidTau(tau.to_string()));
        }
        // A stored document is served whatever the platform's current crawl
        // state, so a running or failed recrawl keeps the last good index.
        let doc = self.store.document(&req.platform_id).ok_or_else(|| ApiError::PlatformNotIndexed(req.platform_id.clone()))?;
        if doc.backend_spec != *self.engine.embedder().spec() {
            return Err(ApiError::Internal(format!(
                "platform {:?} was indexed with a different embedding backend; recrawl it",
                req.platform_id
            )));
        }
        let (answer, stages) = self.engine.answer_with_tau(&req.question, &doc, tau)?;
        let system = self.sampler.sample();
        let metrics = QueryMetrics {
            timing_ms: stages.total_ms(),
            cpu_percent: system.cpu_percent,
            ram_percent: system.ram_percent,
            sampled_at: Utc::now(),
            stages,
            latency_ms: ms(received.elapsed()),
        };
        self.metrics.record(metrics.clone());
        Ok(QueryResponse {
            platform_id: req.platform_id.clone(),
            answer: answer.text,
            sentence_id: answer.sentence_id,
            similarity: answer.similarity,
            relevance: answer.relevance,
            accepted: answer.accepted,
            fallback: answer.fallback_message,
            metrics,
        })
    }
}
