//! Unit-norm text embeddings behind pluggable backends.
//!
//! The reference backend is a signed feature-hashing bag of tokens followed
//! by a seeded Gaussian random projection:
//!
//! 1. tokens = lowercase text split on non-alphanumerics;
//! 2. each token is hashed with 64-bit FNV-1a; the low 15 bits pick one of
//!    2^15 buckets and bit 15 picks the sign (set = negative);
//! 3. the sparse bucket counts are projected to `dim` values, where bucket
//!    `b` contributes `count * column(b)` and `column(b)` is `dim` Gaussians
//!    drawn from [`SplitMix64`] seeded with `seed ^ mix64(b + 1)`;
//!    buckets are accumulated in ascending order;
//! 4. the result is L2-normalized.
//!
//! Identical token multisets therefore give bitwise-identical vectors.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::remote::{JsonClient, RemoteError};
use crate::rng::{mix64, SplitMix64};
use crate::text::tokenize;

pub const REFERENCE_DIM: usize = 384;
pub const HASH_BUCKETS: usize = 1 << 15;
const NORM_TOLERANCE: f64 = 1e-9;
const F32_NORM_TOLERANCE: f64 = 1e-5;

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("text contains no word tokens")]
    EmptyText,
    #[error("token hashes cancelled out to a zero vector")]
    DegenerateVector,
    #[error("vector values must be finite and not all zero")]
    InvalidVector,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("invalid backend spec: {0}")]
    InvalidSpec(String),
    #[error("embedding backend unavailable: {0}")]
    BackendUnavailable(#[from] RemoteError),
}

/// An L2-normalized feature vector.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Normalizes `values` to unit length. Zero or non-finite input is rejected.
    pub fn new(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::InvalidVector);
        }
        let norm = l2_norm(&values);
        if norm == 0.0 || !norm.is_finite() {
            return Err(EmbeddingError::InvalidVector);
        }
        let mut values: Vec<f64> = values.into_iter().map(|v| v / norm).collect();
        // One refinement pass keeps the norm inside the tolerance for
        // badly scaled inputs.
        let norm = l2_norm(&values);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(Self { values })
    }

    /// Widens stored float32 values. Rows that are already unit length to
    /// float32 precision are kept as-is, so `to_f32` gives back the exact
    /// input.
    pub fn from_f32(values: &[f32]) -> Result<Self, EmbeddingError> {
        let wide: Vec<f64> = values.iter().map(|&v| f64::from(v)).collect();
        if wide.iter().all(|v| v.is_finite()) && (l2_norm(&wide) - 1.0).abs() <= F32_NORM_TOLERANCE {
            return Ok(Self { values: wide });
        }
        Self::new(wide)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.values.iter().map(|&v| v as f32).collect()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }
}

impl fmt::Debug for EmbeddingVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EmbeddingVector(dim={}, head={:?})", self.dim(), &self.values[..self.dim().min(4)])
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = EmbeddingError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.values
    }
}

fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Cosine similarity clamped to [-1, 1].
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::DimensionMismatch { left: a.dim(), right: b.dim() });
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let denom = a.norm() * b.norm();
    Ok((dot / denom).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    ReferenceHash,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingBackendSpec {
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_endpoint: Option<String>,
}

impl EmbeddingBackendSpec {
    pub fn reference(seed: u64) -> Self {
        Self::reference_with_dim(seed, REFERENCE_DIM)
    }

    pub fn reference_with_dim(seed: u64, dim: usize) -> Self {
        Self { kind: BackendKind::ReferenceHash, seed: Some(seed), dim, external_endpoint: None }
    }

    pub fn external(endpoint: impl Into<String>, dim: usize) -> Self {
        Self { kind: BackendKind::External, seed: None, dim, external_endpoint: Some(endpoint.into()) }
    }

    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if self.dim == 0 {
            return Err(EmbeddingError::InvalidSpec("dim must be positive".into()));
        }
        match self.kind {
            BackendKind::ReferenceHash if self.seed.is_none() => {
                Err(EmbeddingError::InvalidSpec("reference_hash backend requires a seed".into()))
            }
            BackendKind::External if self.external_endpoint.is_none() => {
                Err(EmbeddingError::InvalidSpec("external backend requires external_endpoint".into()))
            }
            _ => Ok(()),
        }
    }
}

impl Default for EmbeddingBackendSpec {
    fn default() -> Self {
        Self::reference(42)
    }
}

pub trait Embedder: Send + Sync {
    fn spec(&self) -> &EmbeddingBackendSpec;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError>;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let mut out = self.embed_batch(&[text])?;
        out.pop().ok_or(EmbeddingError::EmptyText)
    }
}

pub fn backend_from_spec(spec: &EmbeddingBackendSpec) -> Result<Arc<dyn Embedder>, EmbeddingError> {
    spec.validate()?;
    Ok(match spec.kind {
        BackendKind::ReferenceHash => Arc::new(ReferenceEmbedder::new(spec.seed.unwrap_or_default(), spec.dim)),
        BackendKind::External => Arc::new(ExternalEmbedder::new(spec.clone())?),
    })
}

/// One-shot embedding with a freshly built backend.
pub fn embed(text: &str, spec: &EmbeddingBackendSpec) -> Result<EmbeddingVector, EmbeddingError> {
    backend_from_spec(spec)?.embed(text)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Bucket index and sign for one token.
pub fn hash_token(token: &str) -> (usize, f64) {
    let h = fnv1a64(token.as_bytes());
    let bucket = (h as usize) & (HASH_BUCKETS - 1);
    let sign = if (h >> 15) & 1 == 1 { -1.0 } else { 1.0 };
    (bucket, sign)
}

/// Deterministic hashing + random-projection embedder.
///
/// Projection columns are generated on first use and memoized per bucket;
/// the memo is write-once, so concurrent callers always observe the same
/// column values.
pub struct ReferenceEmbedder {
    spec: EmbeddingBackendSpec,
    seed: u64,
    columns: Vec<OnceLock<Box<[f64]>>>,
}

impl ReferenceEmbedder {
    pub fn new(seed: u64, dim: usize) -> Self {
        assert!(dim > 0, "embedding dim must be positive");
        Self {
            spec: EmbeddingBackendSpec::reference_with_dim(seed, dim),
            seed,
            columns: (0..HASH_BUCKETS).map(|_| OnceLock::new()).collect(),
        }
    }

    fn column(&self, bucket: usize) -> &[f64] {
        self.columns[bucket].get_or_init(|| {
            let mut rng = SplitMix64::new(self.seed ^ mix64(bucket as u64 + 1));
            (0..self.spec.dim).map(|_| rng.next_gaussian()).collect()
        })
    }

    /// Sparse signed bucket counts, ordered by bucket.
    pub fn hashed_counts(text: &str) -> BTreeMap<usize, f64> {
        let mut counts = BTreeMap::new();
        for token in tokenize(text) {
            let (bucket, sign) = hash_token(&token);
            *counts.entry(bucket).or_insert(0.0) += sign;
        }
        counts
    }

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let counts = Self::hashed_counts(text);
        if counts.is_empty() {
            return Err(EmbeddingError::EmptyText);
        }
        let mut projected = vec![0.0f64; self.spec.dim];
        for (&bucket, &count) in &counts {
            if count == 0.0 {
                continue;
            }
            for (p, c) in projected.iter_mut().zip(self.column(bucket)) {
                *p += count * c;
            }
        }
        EmbeddingVector::new(projected).map_err(|_| EmbeddingError::DegenerateVector)
    }
}

impl fmt::Debug for ReferenceEmbedder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReferenceEmbedder").field("spec", &self.spec).finish()
    }
}

impl Embedder for ReferenceEmbedder {
    fn spec(&self) -> &EmbeddingBackendSpec {
        &self.spec
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        texts.iter().map(|t| self.embed_one(t)).collect()
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
    dim: usize,
}

/// Delegates to a remote sentence encoder speaking
/// `{"texts": [...]}` -> `{"vectors": [[...]...], "dim": n}`.
#[derive(Debug)]
pub struct ExternalEmbedder {
    spec: EmbeddingBackendSpec,
    endpoint: String,
    client: JsonClient,
}

impl ExternalEmbedder {
    pub fn new(spec: EmbeddingBackendSpec) -> Result<Self, EmbeddingError> {
        spec.validate()?;
        let endpoint = spec.external_endpoint.clone().unwrap_or_default();
        Ok(Self { spec, endpoint, client: JsonClient::default() })
    }
}

impl Embedder for ExternalEmbedder {
    fn spec(&self) -> &EmbeddingBackendSpec {
        &self.spec
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        if texts.iter().any(|t| tokenize(t).is_empty()) {
            return Err(EmbeddingError::EmptyText);
        }
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let response: EmbedResponse = self.client.post(&self.endpoint, &EmbedRequest { texts })?;
        let bad = |reason: String| {
            EmbeddingError::BackendUnavailable(RemoteError::BadResponse { endpoint: self.endpoint.clone(), reason })
        };
        if response.dim != self.spec.dim {
            return Err(bad(format!("expected dim {}, got {}", self.spec.dim, response.dim)));
        }
        if response.vectors.len() != texts.len() {
            return Err(bad(format!("expected {} vectors, got {}", texts.len(), response.vectors.len())));
        }
        response
            .vectors
            .into_iter()
            .map(|v| {
                if v.len() != self.spec.dim {
                    return Err(bad(format!("vector of length {} in response", v.len())));
                }
                EmbeddingVector::new(v)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&v(&[1.0, 0.0]), &v(&[1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        let a = v(&[0.3, -0.2, 0.9]);
        let neg = v(&[-0.3, 0.2, -0.9]);
        assert!((cosine_similarity(&a, &neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_rejects_mismatched_dims() {
        let err = cosine_similarity(&v(&[1.0, 0.0]), &v(&[1.0, 0.0, 0.0])).unwrap_err();
        assert!(matches!(err, EmbeddingError::DimensionMismatch { left: 2, right: 3 }));
    }

    #[test]
    fn zero_and_nan_vectors_are_rejected() {
        assert!(EmbeddingVector::new(vec![0.0, 0.0]).is_err());
        assert!(EmbeddingVector::new(vec![f64::NAN, 1.0]).is_err());
        assert!(EmbeddingVector::new(vec![]).is_err());
    }

    #[test]
    fn reference_embedding_is_deterministic_and_unit_norm() {
        let spec = EmbeddingBackendSpec::reference(42);
        let a = embed("terms", &spec).unwrap();
        let b = embed("terms", &spec).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(a.dim(), REFERENCE_DIM);
        assert!((a.norm() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn empty_text_is_rejected() {
        let e = ReferenceEmbedder::new(1, 16);
        assert!(matches!(e.embed("  ?! "), Err(EmbeddingError::EmptyText)));
    }

    #[test]
    fn token_order_does_not_matter() {
        let e = ReferenceEmbedder::new(9, 64);
        assert_eq!(e.embed("a b c").unwrap(), e.embed("c b a").unwrap());
        assert_eq!(e.embed("Share DATA, share").unwrap(), e.embed("share share data").unwrap());
    }

    #[test]
    fn different_seeds_give_different_vectors() {
        let a = ReferenceEmbedder::new(1, 32).embed("privacy policy").unwrap();
        let b = ReferenceEmbedder::new(2, 32).embed("privacy policy").unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn token_overlap_orders_similarity() {
        // Frozen regression values for seed 42, dim 384.
        let spec = EmbeddingBackendSpec::reference(42);
        let base = embed("we collect email data", &spec).unwrap();
        let near = embed("we collect email data today", &spec).unwrap();
        let far = embed("governing law is california", &spec).unwrap();
        let near_cos = cosine_similarity(&base, &near).unwrap();
        let far_cos = cosine_similarity(&base, &far).unwrap();
        assert!(near_cos > far_cos);
        assert!((near_cos - NEAR_COS_SEED42).abs() < 1e-12, "near {near_cos:.17}");
        assert!((far_cos - FAR_COS_SEED42).abs() < 1e-12, "far {far_cos:.17}");
    }

    const NEAR_COS_SEED42: f64 = 0.882_422_832_546_239_1;
    const FAR_COS_SEED42: f64 = -0.025_751_043_614_506_988;

    #[test]
    fn spec_validation() {
        assert!(EmbeddingBackendSpec::reference(1).validate().is_ok());
        let mut s = EmbeddingBackendSpec::reference(1);
        s.seed = None;
        assert!(s.validate().is_err());
        let mut ext = EmbeddingBackendSpec::external("http://127.0.0.1:1/embed", 8);
        assert!(ext.validate().is_ok());
        ext.external_endpoint = None;
        assert!(ext.validate().is_err());
    }

    #[test]
    fn spec_json_shape() {
        let json = serde_json::to_value(EmbeddingBackendSpec::reference(7)).unwrap();
        assert_eq!(json, serde_json::json!({"kind": "reference_hash", "seed": 7, "dim": 384}));
    }

    #[test]
    fn unreachable_external_backend_reports_unavailable() {
        let spec = EmbeddingBackendSpec::external("http://127.0.0.1:9/embed", 4);
        let err = embed("hello world", &spec).unwrap_err();
        assert!(matches!(err, EmbeddingError::BackendUnavailable(_)), "{err:?}");
    }
}
