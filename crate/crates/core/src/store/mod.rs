//! On-disk platform store, document cache and crawl queue.
//!
//! Layout under the data directory:
//!
//! ```text
//! queue.json
//! platforms/<platform_id>/platform.json
//! platforms/<platform_id>/document.md
//! platforms/<platform_id>/sentences.jsonl
//! platforms/<platform_id>/embeddings.bin
//! ```
//!
//! Every file is replaced by write-to-temp-then-rename. Document files are
//! written before `platform.json`, which records the document hash and
//! sentence count and therefore acts as the commit point. In-process
//! readers get documents as `Arc` snapshots, so a reader holds either the
//! old or the new document in full.

pub mod embeddings_bin;
mod slug;

use std::collections::{HashMap, VecDeque};
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use tracing::warn;
use url::Url;

use crate::document::{ContentHash, DocumentDraft, Sentence, TosDocument};
use crate::embedding::{Embedder, EmbeddingBackendSpec, EmbeddingError, EmbeddingVector};
use crate::index::build_or_reuse;

pub use slug::{is_valid_platform_id, platform_id_from_url, registrable_domain};

pub const DEFAULT_RECRAWL_DAYS: i64 = 7;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("storage failure at {path}: {source}")]
    StorageFailure { path: PathBuf, source: io::Error },
    #[error("corrupt store file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("invalid url {0:?}")]
    InvalidUrl(String),
    #[error("invalid platform id {0:?}")]
    InvalidPlatformId(String),
    #[error("unknown platform {0:?}")]
    UnknownPlatform(String),
    #[error("illegal status transition for {platform_id}: {from:?} -> {to:?}")]
    IllegalTransition { platform_id: String, from: PlatformStatus, to: PlatformStatus },
    #[error("document invariant violated: {0}")]
    InvalidDocument(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::StorageFailure { path: path.to_owned(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlatformStatus {
    Unindexed,
    Queued,
    Crawling,
    Indexed,
    Failed,
}

impl PlatformStatus {
    /// Transitions the queue and worker may perform.
    pub fn can_transition_to(self, to: PlatformStatus) -> bool {
        use PlatformStatus::*;
        matches!(
            (self, to),
            (Unindexed, Queued)
                | (Queued, Crawling)
                | (Crawling, Indexed)
                | (Crawling, Failed)
                | (Indexed, Queued)
                | (Indexed, Crawling)
                | (Failed, Queued)
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PlatformStatus::Unindexed => "unindexed",
            PlatformStatus::Queued => "queued",
            PlatformStatus::Crawling => "crawling",
            PlatformStatus::Indexed => "indexed",
            PlatformStatus::Failed => "failed",
        }
    }
}

mod duration_secs {
    use chrono::Duration;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i64(d.num_seconds())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::seconds(i64::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentMeta {
    pub source_urls: Vec<String>,
    pub content_hash: ContentHash,
    pub backend_spec: EmbeddingBackendSpec,
    pub fetched_at: DateTime<Utc>,
    pub sentence_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Platform {
    pub platform_id: String,
    pub display_name: String,
    pub seed_url: Url,
    pub status: PlatformStatus,
    pub last_crawled_at: Option<DateTime<Utc>>,
    #[serde(rename = "recrawl_interval_secs", with = "duration_secs")]
    pub recrawl_interval: Duration,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub document: Option<DocumentMeta>,
}

impl Platform {
    pub fn new(platform_id: impl Into<String>, display_name: impl Into<String>, seed_url: Url) -> Self {
        Self {
            platform_id: platform_id.into(),
            display_name: display_name.into(),
            seed_url,
            status: PlatformStatus::Unindexed,
            last_crawled_at: None,
            recrawl_interval: Duration::days(DEFAULT_RECRAWL_DAYS),
            failure_reason: None,
            document: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueSource {
    UserSubmission,
    RecrawlScheduler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrawlQueueEntry {
    pub entry_id: u64,
    pub platform_id: String,
    pub seed_url: Url,
    pub enqueued_at: DateTime<Utc>,
    pub source: QueueSource,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct QueueFile {
    next_entry_id: u64,
    entries: VecDeque<CrawlQueueEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpsertOutcome {
    /// True when embeddings were carried over instead of recomputed.
    pub reused_embeddings: bool,
    pub sentence_count: usize,
}

#[derive(Serialize, Deserialize)]
struct SentenceLine {
    id: usize,
    text: String,
}

struct State {
    platforms: HashMap<String, Platform>,
    queue: QueueFile,
}

pub struct TosStore {
    root: PathBuf,
    state: Mutex<State>,
    documents: RwLock<HashMap<String, Arc<TosDocument>>>,
    default_recrawl: Duration,
}

impl std::fmt::Debug for TosStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TosStore").field("root", &self.root).finish_non_exhaustive()
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let tmp = path.with_extension(format!("tmp-{}", std::process::id()));
    let write = || -> io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        StoreError::StorageFailure { path: path.to_owned(), source: e }
    })
}

impl TosStore {
    /// Opens (creating if needed) a store rooted at `root` and loads every
    /// platform and document into memory.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let platforms_dir = root.join("platforms");
        fs::create_dir_all(&platforms_dir).map_err(io_err(&platforms_dir))?;

        let queue_path = root.join("queue.json");
        let queue = match fs::read(&queue_path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map_err(|e| StoreError::Corrupt { path: queue_path.clone(), reason: e.to_string() })?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => QueueFile::default(),
            Err(e) => return Err(StoreError::StorageFailure { path: queue_path, source: e }),
        };

        let mut platforms = HashMap::new();
        let mut documents = HashMap::new();
        let entries = fs::read_dir(&platforms_dir).map_err(io_err(&platforms_dir))?;
        for entry in entries {
            let dir = entry.map_err(io_err(&platforms_dir))?.path();
            let meta_path = dir.join("platform.json");
            if !meta_path.is_file() {
                continue;
            }
            let bytes = fs::read(&meta_path).map_err(io_err(&meta_path))?;
            let mut platform: Platform = serde_json::from_slice(&bytes)
                .map_err(|e| StoreError::Corrupt { path: meta_path.clone(), reason: e.to_string() })?;
            if let Some(meta) = &platform.document {
                match load_document(&dir, &platform.platform_id, meta) {
                    Ok(doc) => {
                        documents.insert(platform.platform_id.clone(), Arc::new(doc));
                    }
                    Err(e) => {
                        warn!(platform = %platform.platform_id, error = %e, "dropping unreadable document");
                        platform.document = None;
                        if platform.status == PlatformStatus::Indexed {
                            platform.status = PlatformStatus::Failed;
                            platform.failure_reason = Some(format!("stored document unreadable: {e}"));
                        }
                    }
                }
            }
            platforms.insert(platform.platform_id.clone(), platform);
        }

        Ok(Self {
            root,
            state: Mutex::new(State { platforms, queue }),
            documents: RwLock::new(documents),
            default_recrawl: Duration::days(DEFAULT_RECRAWL_DAYS),
        })
    }

    /// Recrawl interval given to platforms registered from now on.
    pub fn with_default_recrawl_interval(mut self, interval: Duration) -> Self {
        self.default_recrawl = interval;
        self
    }

    fn new_platform(&self, platform_id: &str, display_name: &str, seed_url: Url) -> Platform {
        Platform { recrawl_interval: self.default_recrawl, ..Platform::new(platform_id, display_name, seed_url) }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn platform_dir(&self, platform_id: &str) -> PathBuf {
        self.root.join("platforms").join(platform_id)
    }

    fn persist_platform(&self, platform: &Platform) -> Result<(), StoreError> {
        let path = self.platform_dir(&platform.platform_id).join("platform.json");
        let json = serde_json::to_vec_pretty(platform).expect("platform serializes");
        write_atomic(&path, &json)
    }

    fn persist_queue(&self, queue: &QueueFile) -> Result<(), StoreError> {
        let json = serde_json::to_vec_pretty(queue).expect("queue serializes");
        write_atomic(&self.root.join("queue.json"), &json)
    }

    pub fn platform(&self, platform_id: &str) -> Option<Platform> {
        self.lock().platforms.get(platform_id).cloned()
    }

    /// All platforms sorted by id.
    pub fn platforms(&self) -> Vec<Platform> {
        let mut out: Vec<Platform> = self.lock().platforms.values().cloned().collect();
        out.sort_by(|a, b| a.platform_id.cmp(&b.platform_id));
        out
    }

    pub fn document(&self, platform_id: &str) -> Option<Arc<TosDocument>> {
        self.documents.read().unwrap_or_else(|e| e.into_inner()).get(platform_id).cloned()
    }

    pub fn pending(&self) -> Vec<CrawlQueueEntry> {
        self.lock().queue.entries.iter().cloned().collect()
    }

    /// Creates the platform if unknown; otherwise updates its name and seed.
    pub fn register_platform(&self, platform_id: &str, display_name: &str, seed_url: &Url) -> Result<Platform, StoreError> {
        if !is_valid_platform_id(platform_id) {
            return Err(StoreError::InvalidPlatformId(platform_id.to_owned()));
        }
        let mut state = self.lock();
        let platform = state
            .platforms
            .entry(platform_id.to_owned())
            .and_modify(|p| {
                p.display_name = display_name.to_owned();
                p.seed_url = seed_url.clone();
            })
            .or_insert_with(|| self.new_platform(platform_id, display_name, seed_url.clone()))
            .clone();
        self.persist_platform(&platform)?;
        Ok(platform)
    }

    pub fn set_recrawl_interval(&self, platform_id: &str, interval: Duration) -> Result<(), StoreError> {
        let mut state = self.lock();
        let platform = state
            .platforms
            .get_mut(platform_id)
            .ok_or_else(|| StoreError::UnknownPlatform(platform_id.to_owned()))?;
        platform.recrawl_interval = interval;
        let snapshot = platform.clone();
        self.persist_platform(&snapshot)
    }

    /// Appends a FIFO entry, coalescing with a pending entry for the same
    /// platform. Unknown platforms are registered on the fly.
    pub fn enqueue_crawl(&self, platform_id: &str, seed_url: &str, source: QueueSource) -> Result<CrawlQueueEntry, StoreError> {
        let seed = Url::parse(seed_url).map_err(|_| StoreError::InvalidUrl(seed_url.to_owned()))?;
        if !matches!(seed.scheme(), "http" | "https") || seed.host_str().is_none() {
            return Err(StoreError::InvalidUrl(seed_url.to_owned()));
        }
        if !is_valid_platform_id(platform_id) {
            return Err(StoreError::InvalidPlatformId(platform_id.to_owned()));
        }
        let mut state = self.lock();
        if let Some(existing) = state.queue.entries.iter().find(|e| e.platform_id == platform_id) {
            return Ok(existing.clone());
        }
        let platform = state
            .platforms
            .entry(platform_id.to_owned())
            .or_insert_with(|| self.new_platform(platform_id, platform_id, seed.clone()));
        if matches!(platform.status, PlatformStatus::Unindexed | PlatformStatus::Failed) {
            platform.status = PlatformStatus::Queued;
            platform.seed_url = seed.clone();
        }
        let platform = platform.clone();

        state.queue.next_entry_id += 1;
        let entry = CrawlQueueEntry {
            entry_id: state.queue.next_entry_id,
            platform_id: platform_id.to_owned(),
            seed_url: seed,
            enqueued_at: Utc::now(),
            source,
        };
        state.queue.entries.push_back(entry.clone());
        self.persist_platform(&platform)?;
        self.persist_queue(&state.queue)?;
        Ok(entry)
    }

    /// Pops the oldest entry and marks its platform as crawling.
    pub fn dequeue(&self) -> Result<Option<CrawlQueueEntry>, StoreError> {
        let mut state = self.lock();
        let Some(entry) = state.queue.entries.pop_front() else { return Ok(None) };
        self.begin_crawl_locked(&mut state, &entry.platform_id)?;
        self.persist_queue(&state.queue)?;
        Ok(Some(entry))
    }

    /// Removes the pending entry for `platform_id`, if any, and marks the
    /// platform as crawling. Used by synchronous crawls.
    pub fn claim(&self, platform_id: &str) -> Result<Option<CrawlQueueEntry>, StoreError> {
        let mut state = self.lock();
        let Some(pos) = state.queue.entries.iter().position(|e| e.platform_id == platform_id) else {
            return Ok(None);
        };
        let entry = state.queue.entries.remove(pos).expect("position is valid");
        self.begin_crawl_locked(&mut state, platform_id)?;
        self.persist_queue(&state.queue)?;
        Ok(Some(entry))
    }

    fn begin_crawl_locked(&self, state: &mut State, platform_id: &str) -> Result<(), StoreError> {
        let platform = state
            .platforms
            .get_mut(platform_id)
            .ok_or_else(|| StoreError::UnknownPlatform(platform_id.to_owned()))?;
        transition(platform, PlatformStatus::Crawling)?;
        platform.failure_reason = None;
        let snapshot = platform.clone();
        self.persist_platform(&snapshot)
    }

    pub fn mark_failed(&self, platform_id: &str, reason: &str) -> Result<(), StoreError> {
        let mut state = self.lock();
        let platform = state
            .platforms
            .get_mut(platform_id)
            .ok_or_else(|| StoreError::UnknownPlatform(platform_id.to_owned()))?;
        transition(platform, PlatformStatus::Failed)?;
        platform.failure_reason = Some(reason.to_owned());
        let snapshot = platform.clone();
        self.persist_platform(&snapshot)
    }

    /// Encodes `draft` (or reuses the stored embeddings when the content hash
    /// and backend are unchanged) and replaces the platform's document.
    pub fn upsert_document(&self, draft: DocumentDraft, embedder: &dyn Embedder) -> Result<UpsertOutcome, StoreError> {
        let previous = self.document(&draft.platform_id);
        let (doc, reused) = build_or_reuse(draft, embedder, previous.as_deref())?;
        let count = doc.sentences.len();
        self.put_document(doc, !reused)?;
        Ok(UpsertOutcome { reused_embeddings: reused, sentence_count: count })
    }

    /// Stores an already-encoded document. Also accepts documents for
    /// platforms that were never crawled (imports), registering them.
    pub fn insert_document(&self, doc: TosDocument) -> Result<(), StoreError> {
        self.put_document(doc, true)
    }

    fn put_document(&self, doc: TosDocument, write_embeddings: bool) -> Result<(), StoreError> {
        validate_document(&doc)?;
        if !is_valid_platform_id(&doc.platform_id) {
            return Err(StoreError::InvalidPlatformId(doc.platform_id.clone()));
        }
        let mut state = self.lock();
        let dir = self.platform_dir(&doc.platform_id);
        let embeddings_path = dir.join("embeddings.bin");
        if write_embeddings || !embeddings_path.is_file() {
            let rows: Vec<Vec<f32>> = doc.sentences.iter().map(|s| s.embedding.to_f32()).collect();
            let mut buf = Vec::new();
            embeddings_bin::write(&mut buf, doc.dim(), &rows)
                .map_err(|e| StoreError::InvalidDocument(e.to_string()))?;
            write_atomic(&embeddings_path, &buf)?;
        }
        let mut jsonl = Vec::new();
        for s in &doc.sentences {
            serde_json::to_writer(&mut jsonl, &SentenceLine { id: s.sentence_id, text: s.text.clone() })
                .expect("sentence serializes");
            jsonl.push(b'\n');
        }
        write_atomic(&dir.join("sentences.jsonl"), &jsonl)?;
        write_atomic(&dir.join("document.md"), doc.merged_markdown.as_bytes())?;

        let seed_fallback = doc
            .source_urls
            .first()
            .and_then(|u| Url::parse(u).ok())
            .unwrap_or_else(|| Url::parse("http://localhost/").expect("static url"));
        let platform = state
            .platforms
            .entry(doc.platform_id.clone())
            .or_insert_with(|| self.new_platform(&doc.platform_id, &doc.platform_id, seed_fallback));
        platform.status = PlatformStatus::Indexed;
        platform.last_crawled_at = Some(doc.fetched_at);
        platform.failure_reason = None;
        platform.document = Some(DocumentMeta {
            source_urls: doc.source_urls.clone(),
            content_hash: doc.content_hash,
            backend_spec: doc.backend_spec.clone(),
            fetched_at: doc.fetched_at,
            sentence_count: doc.sentences.len(),
        });
        let snapshot = platform.clone();
        self.persist_platform(&snapshot)?;

        // Reload from the committed files so the cached copy matches what a
        // fresh process would see (float32 storage).
        let meta = snapshot.document.as_ref().expect("just set");
        let stored = load_document(&dir, &doc.platform_id, meta)?;
        self.documents
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(doc.platform_id.clone(), Arc::new(stored));
        Ok(())
    }

    /// Enqueues every indexed platform whose last crawl is at least its
    /// recrawl interval old and that has no pending entry.
    pub fn schedule_recrawls(&self, now: DateTime<Utc>) -> Result<Vec<CrawlQueueEntry>, StoreError> {
        let due: Vec<(String, Url)> = {
            let state = self.lock();
            let mut due: Vec<_> = state
                .platforms
                .values()
                .filter(|p| p.status == PlatformStatus::Indexed)
                .filter(|p| p.last_crawled_at.is_some_and(|t| now - t >= p.recrawl_interval))
                .filter(|p| !state.queue.entries.iter().any(|e| e.platform_id == p.platform_id))
                .map(|p| (p.platform_id.clone(), p.seed_url.clone()))
                .collect();
            due.sort();
            due
        };
        due.into_iter()
            .map(|(id, seed)| self.enqueue_crawl(&id, seed.as_str(), QueueSource::RecrawlScheduler))
            .collect()
    }
}

fn transition(platform: &mut Platform, to: PlatformStatus) -> Result<(), StoreError> {
    if !platform.status.can_transition_to(to) {
        return Err(StoreError::IllegalTransition { platform_id: platform.platform_id.clone(), from: platform.status, to });
    }
    platform.status = to;
    Ok(())
}

fn validate_document(doc: &TosDocument) -> Result<(), StoreError> {
    for (i, s) in doc.sentences.iter().enumerate() {
        if s.sentence_id != i {
            return Err(StoreError::InvalidDocument(format!("sentence {i} has id {}", s.sentence_id)));
        }
        if s.embedding.dim() != doc.dim() {
            return Err(StoreError::InvalidDocument(format!(
                "sentence {i} has dim {}, backend dim is {}",
                s.embedding.dim(),
                doc.dim()
            )));
        }
    }
    Ok(())
}

fn load_document(dir: &Path, platform_id: &str, meta: &DocumentMeta) -> Result<TosDocument, StoreError> {
    let corrupt = |path: &Path, reason: String| StoreError::Corrupt { path: path.to_owned(), reason };

    let md_path = dir.join("document.md");
    let merged_markdown = fs::read_to_string(&md_path).map_err(io_err(&md_path))?;
    if ContentHash::of(&merged_markdown) != meta.content_hash {
        return Err(corrupt(&md_path, "content hash mismatch".into()));
    }

    let jsonl_path = dir.join("sentences.jsonl");
    let file = fs::File::open(&jsonl_path).map_err(io_err(&jsonl_path))?;
    let mut texts = Vec::new();
    for line in io::BufReader::new(file).lines() {
        let line = line.map_err(io_err(&jsonl_path))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: SentenceLine = serde_json::from_str(&line).map_err(|e| corrupt(&jsonl_path, e.to_string()))?;
        if parsed.id != texts.len() {
            return Err(corrupt(&jsonl_path, format!("sentence id {} out of order", parsed.id)));
        }
        texts.push(parsed.text);
    }

    let bin_path = dir.join("embeddings.bin");
    let file = fs::File::open(&bin_path).map_err(io_err(&bin_path))?;
    let (header, rows) = embeddings_bin::read(io::BufReader::new(file)).map_err(|e| corrupt(&bin_path, e.to_string()))?;
    if header.dim as usize != meta.backend_spec.dim {
        return Err(corrupt(&bin_path, format!("dim {} != backend dim {}", header.dim, meta.backend_spec.dim)));
    }
    if rows.len() != texts.len() || texts.len() != meta.sentence_count {
        return Err(corrupt(&bin_path, format!("{} vectors for {} sentences", rows.len(), texts.len())));
    }

    let sentences = texts
        .into_iter()
        .zip(rows)
        .enumerate()
        .map(|(i, (text, row))| {
            let embedding = EmbeddingVector::from_f32(&row).map_err(|e| corrupt(&bin_path, format!("row {i}: {e}")))?;
            Ok(Sentence { sentence_id: i, text, embedding })
        })
        .collect::<Result<Vec<_>, StoreError>>()?;

    Ok(TosDocument {
        platform_id: platform_id.to_owned(),
        merged_markdown,
        source_urls: meta.source_urls.clone(),
        sentences,
        content_hash: meta.content_hash,
        backend_spec: meta.backend_spec.clone(),
        fetched_at: meta.fetched_at,
    })
}

/// Raw float32 rows of a stored `embeddings.bin`.
pub fn read_embeddings_file(path: &Path) -> Result<(embeddings_bin::Header, Vec<Vec<f32>>), StoreError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    embeddings_bin::read(io::BufReader::new(file))
        .map_err(|e| StoreError::Corrupt { path: path.to_owned(), reason: e.to_string() })
}
