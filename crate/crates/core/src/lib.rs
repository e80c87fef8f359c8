//! Core of the ToS question-answering engine.
//!
//! - [`crawler`]: discover, fetch, clean and merge multi-page ToS content.
//! - [`embedding`] and [`segment`]: statements and their unit-norm vectors.
//! - [`qa`]: top-1 cosine retrieval behind a relevance gate.
//! - [`store`]: persisted platforms, documents, embeddings and crawl queue.
//! - [`qep`]: cluster-based evaluation of answer quality.

pub mod crawler;
pub mod document;
pub mod embedding;
pub mod index;
pub mod qa;
pub mod qep;
mod remote;
pub mod rng;
pub mod segment;
pub mod store;
pub mod text;

pub use document::{ContentHash, DocumentDraft, Sentence, TosDocument};
pub use embedding::{cosine_similarity, embed, Embedder, EmbeddingBackendSpec, EmbeddingError, EmbeddingVector};
pub use qa::{answer_query, retrieve_best, Answer, QaConfig, QaEngine, QaError};
pub use remote::RemoteError;
pub use segment::segment_sentences;

/// User-Agent sent on every outgoing request.
pub const USER_AGENT: &str = concat!("tos-qa-engine/", env!("CARGO_PKG_VERSION"));
