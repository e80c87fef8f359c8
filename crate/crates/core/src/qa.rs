//! Nearest-statement retrieval with a relevance gate.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::document::TosDocument;
use crate::embedding::{cosine_similarity, Embedder, EmbeddingError, EmbeddingVector};
use crate::remote::{JsonClient, RemoteError};
use crate::text::content_tokens;

pub const DEFAULT_TAU: f64 = 0.3;
pub const DEFAULT_FALLBACK: &str = "No valid answer could be found within this document.";

#[derive(Debug, thiserror::Error)]
pub enum QaError {
    #[error("document index is empty")]
    EmptyIndex,
    #[error("question contains no word tokens")]
    EmptyText,
    #[error("tau must lie in [0, 1], got {0}")]
    InvalidTau(f64),
    #[error(transparent)]
    Embedding(EmbeddingError),
    #[error("relevance backend unavailable: {0}")]
    BackendUnavailable(#[from] RemoteError),
}

impl From<EmbeddingError> for QaError {
    fn from(e: EmbeddingError) -> Self {
        match e {
            EmbeddingError::EmptyText => QaError::EmptyText,
            other => QaError::Embedding(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelevanceBackendKind {
    #[default]
    ReferenceOverlap,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QaConfig {
    pub tau: f64,
    pub fallback_text: String,
    pub relevance_backend: RelevanceBackendKind,
}

impl Default for QaConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            fallback_text: DEFAULT_FALLBACK.to_owned(),
            relevance_backend: RelevanceBackendKind::ReferenceOverlap,
        }
    }
}

impl QaConfig {
    pub fn with_tau(mut self, tau: f64) -> Result<Self, QaError> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(QaError::InvalidTau(tau));
        }
        self.tau = tau;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), QaError> {
        if (0.0..=1.0).contains(&self.tau) {
            Ok(())
        } else {
            Err(QaError::InvalidTau(self.tau))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub sentence_id: usize,
    pub text: String,
    pub similarity: f64,
    pub relevance: f64,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_message: Option<String>,
}

/// Wall-clock spent in each stage of [`QaEngine::answer`], in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub embed_ms: f64,
    pub retrieval_ms: f64,
    pub relevance_ms: f64,
}

impl StageTimings {
    pub fn total_ms(&self) -> f64 {
        self.embed_ms + self.retrieval_ms + self.relevance_ms
    }
}

/// Exact linear scan for the entry with the highest cosine similarity.
/// Ties go to the smallest sentence id.
pub fn retrieve_best<'a, I>(query: &EmbeddingVector, index: I) -> Result<(usize, f64), QaError>
where
    I: IntoIterator<Item = (usize, &'a EmbeddingVector)>,
{
    let mut best: Option<(usize, f64)> = None;
    for (id, vector) in index {
        let sim = cosine_similarity(query, vector)?;
        best = match best {
            Some((best_id, best_sim)) if sim < best_sim || (sim == best_sim && id > best_id) => Some((best_id, best_sim)),
            _ => Some((id, sim)),
        };
    }
    best.ok_or(QaError::EmptyIndex)
}

/// Scores how well a candidate statement answers a question, in [0, 1].
pub trait RelevanceScorer: Send + Sync {
    fn score(&self, question: &str, candidate: &str) -> Result<f64, QaError>;
}

/// Jaccard overlap of stopword-filtered token sets. Symmetric.
#[derive(Debug, Clone, Copy, Default)]
pub struct OverlapScorer;

pub fn jaccard_relevance(question: &str, candidate: &str) -> f64 {
    use std::collections::BTreeSet;
    let q: BTreeSet<String> = content_tokens(question).into_iter().collect();
    let s: BTreeSet<String> = content_tokens(candidate).into_iter().collect();
    let union = q.union(&s).count();
    if union == 0 {
        return 0.0;
    }
    q.intersection(&s).count() as f64 / union as f64
}

impl RelevanceScorer for OverlapScorer {
    fn score(&self, question: &str, candidate: &str) -> Result<f64, QaError> {
        Ok(jaccard_relevance(question, candidate))
    }
}

#[derive(Serialize)]
struct RelevanceRequest<'a> {
    premise: &'a str,
    hypothesis: &'a str,
}

#[derive(Deserialize)]
struct RelevanceResponse {
    score: f64,
}

/// NLI-style remote scorer. The candidate statement is sent as the premise
/// and the question as the hypothesis:
/// `{"premise": ..., "hypothesis": ...}` -> `{"score": f}`.
#[derive(Debug)]
pub struct ExternalScorer {
    endpoint: String,
    client: JsonClient,
}

impl ExternalScorer {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self { endpoint: endpoint.into(), client: JsonClient::default() }
    }
}

impl RelevanceScorer for ExternalScorer {
    fn score(&self, question: &str, candidate: &str) -> Result<f64, QaError> {
        let resp: RelevanceResponse =
            self.client.post(&self.endpoint, &RelevanceRequest { premise: candidate, hypothesis: question })?;
        if !resp.score.is_finite() {
            return Err(RemoteError::BadResponse { endpoint: self.endpoint.clone(), reason: "non-finite score".into() }.into());
        }
        Ok(resp.score.clamp(0.0, 1.0))
    }
}

/// Question answering over one indexed document.
#[derive(Clone)]
pub struct QaEngine {
    embedder: Arc<dyn Embedder>,
    scorer: Arc<dyn RelevanceScorer>,
    config: QaConfig,
}

impl QaEngine {
    pub fn new(embedder: Arc<dyn Embedder>, scorer: Arc<dyn RelevanceScorer>, config: QaConfig) -> Self {
        Self { embedder, scorer, config }
    }

    pub fn reference(embedder: Arc<dyn Embedder>) -> Self {
        Self::new(embedder, Arc::new(OverlapScorer), QaConfig::default())
    }

    pub fn config(&self) -> &QaConfig {
        &self.config
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn answer(&self, question: &str, doc: &TosDocument) -> Result<Answer, QaError> {
        self.answer_with_tau(question, doc, self.config.tau).map(|(a, _)| a)
    }

    /// Answers with an explicit τ and reports per-stage timings.
    pub fn answer_with_tau(&self, question: &str, doc: &TosDocument, tau: f64) -> Result<(Answer, StageTimings), QaError> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(QaError::InvalidTau(tau));
        }
        if doc.sentences.is_empty() {
            return Err(QaError::EmptyIndex);
        }
        let mut timings = StageTimings::default();

        let started = Instant::now();
        let query = self.embedder.embed(question)?;
        timings.embed_ms = ms_since(started);

        let started = Instant::now();
        let (sentence_id, similarity) = retrieve_best(&query, doc.index())?;
        timings.retrieval_ms = ms_since(started);

        let text = doc.sentences[sentence_id].text.clone();
        let started = Instant::now();
        let relevance = self.scorer.score(question, &text)?.clamp(0.0, 1.0);
        timings.relevance_ms = ms_since(started);

        let accepted = relevance >= tau;
        let answer = Answer {
            sentence_id,
            text,
            similarity,
            relevance,
            accepted,
            fallback_message: (!accepted).then(|| self.config.fallback_text.clone()),
        };
        Ok((answer, timings))
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1000.0
}

/// Free-function form of [`QaEngine::answer`].
pub fn answer_query(
    question: &str,
    doc: &TosDocument,
    cfg: &QaConfig,
    embedder: Arc<dyn Embedder>,
    scorer: Arc<dyn RelevanceScorer>,
) -> Result<Answer, QaError> {
    cfg.validate()?;
    QaEngine::new(embedder, scorer, cfg.clone()).answer(question, doc)
}
