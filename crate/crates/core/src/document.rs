//! Indexed ToS documents and their statements.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embedding::{EmbeddingBackendSpec, EmbeddingVector};

/// SHA-256 of some UTF-8 content, rendered as lowercase hex.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContentHash([u8; 32]);

impl ContentHash {
    pub fn of(content: &str) -> Self {
        Self(Sha256::digest(content.as_bytes()).into())
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ContentHash({})", &self.to_hex()[..12])
    }
}

impl fmt::Display for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid content hash {0:?}")]
pub struct ParseHashError(String);

impl FromStr for ContentHash {
    type Err = ParseHashError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 64 || !s.is_ascii() {
            return Err(ParseHashError(s.to_owned()));
        }
        let mut out = [0u8; 32];
        for (i, byte) in out.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).map_err(|_| ParseHashError(s.to_owned()))?;
        }
        Ok(Self(out))
    }
}

impl Serialize for ContentHash {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for ContentHash {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One statement of a document. `sentence_id` is its position, from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub sentence_id: usize,
    pub text: String,
    pub embedding: EmbeddingVector,
}

/// Crawl output before encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentDraft {
    pub platform_id: String,
    pub merged_markdown: String,
    pub source_urls: Vec<String>,
    pub content_hash: ContentHash,
    pub fetched_at: DateTime<Utc>,
}

impl DocumentDraft {
    pub fn new(platform_id: impl Into<String>, merged_markdown: impl Into<String>, source_urls: Vec<String>) -> Self {
        let merged_markdown = merged_markdown.into();
        Self {
            platform_id: platform_id.into(),
            content_hash: ContentHash::of(&merged_markdown),
            merged_markdown,
            source_urls,
            fetched_at: Utc::now(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TosDocument {
    pub platform_id: String,
    pub merged_markdown: String,
    pub source_urls: Vec<String>,
    pub sentences: Vec<Sentence>,
    pub content_hash: ContentHash,
    pub backend_spec: EmbeddingBackendSpec,
    pub fetched_at: DateTime<Utc>,
}

impl TosDocument {
    pub fn sentence(&self, id: usize) -> Option<&Sentence> {
        self.sentences.get(id)
    }

    pub fn dim(&self) -> usize {
        self.backend_spec.dim
    }

    pub fn index(&self) -> impl Iterator<Item = (usize, &EmbeddingVector)> {
        self.sentences.iter().map(|s| (s.sentence_id, &s.embedding))
    }
}
