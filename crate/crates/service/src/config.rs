//! Service configuration, shared with the CLI.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tosqa_core::crawler::CrawlConfig;
use tosqa_core::qa::{QaConfig, RelevanceBackendKind, DEFAULT_FALLBACK, DEFAULT_TAU};
use tosqa_core::store::DEFAULT_RECRAWL_DAYS;
use tosqa_core::EmbeddingBackendSpec;

/// Environment variable holding the path of the JSON config file.
pub const CONFIG_ENV: &str = "TOSQA_CONFIG";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen_addr: SocketAddr,
    pub data_dir: PathBuf,
    pub backend: EmbeddingBackendSpec,
    pub tau: f64,
    pub fallback_text: String,
    pub relevance_backend: RelevanceBackendKind,
    /// Required when `relevance_backend` is `external`.
    pub relevance_endpoint: Option<String>,
    /// Remote question generator used by QEP runs; template questions
    /// when absent.
    pub question_endpoint: Option<String>,
    pub poll_interval_ms: u64,
    pub scheduler_interval_ms: u64,
    pub recrawl_interval_days: i64,
    /// Allowed browser origins. Empty means any origin.
    pub cors_origins: Vec<String>,
    /// Crawl jobs the worker runs at the same time.
    pub crawl_concurrency: usize,
    /// Crawl limits; `seed_url` is ignored (each job brings its own).
    pub crawl: CrawlConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen_addr: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_dir: PathBuf::from("tosqa-data"),
            backend: EmbeddingBackendSpec::default(),
            tau: DEFAULT_TAU,
            fallback_text: DEFAULT_FALLBACK.to_owned(),
            relevance_backend: RelevanceBackendKind::ReferenceOverlap,
            relevance_endpoint: None,
            question_endpoint: None,
            poll_interval_ms: 2_000,
            scheduler_interval_ms: 3_600_000,
            recrawl_interval_days: DEFAULT_RECRAWL_DAYS,
            cors_origins: Vec::new(),
            crawl_concurrency: 1,
            crawl: CrawlConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let bytes = std::fs::read(path).map_err(|source| ConfigError::Read { path: path.to_owned(), source })?;
        let config: Self =
            serde_json::from_slice(&bytes).map_err(|source| ConfigError::Parse { path: path.to_owned(), source })?;
        config.validate()?;
        Ok(config)
    }

    /// Loads the file named by `TOSQA_CONFIG`, or the defaults when unset.
    pub fn from_env() -> Result<Self, ConfigError> {
        match std::env::var_os(CONFIG_ENV) {
            Some(path) => Self::load(Path::new(&path)),
            None => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_owned()));
        if !(0.0..=1.0).contains(&self.tau) {
            return invalid("tau must lie in [0, 1]");
        }
        if self.poll_interval_ms == 0 || self.scheduler_interval_ms == 0 {
            return invalid("poll_interval_ms and scheduler_interval_ms must be positive");
        }
        if self.recrawl_interval_days < 0 {
            return invalid("recrawl_interval_days must not be negative");
        }
        if self.crawl_concurrency == 0 {
            return invalid("crawl_concurrency must be at least 1");
        }
        if self.relevance_backend == RelevanceBackendKind::External && self.relevance_endpoint.is_none() {
            return invalid("relevance_backend external needs relevance_endpoint");
        }
        self.backend.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn qa_config(&self) -> QaConfig {
        QaConfig { tau: self.tau, fallback_text: self.fallback_text.clone(), relevance_backend: self.relevance_backend }
    }

    pub fn poll_interval(&self) -> Duration {
        Duration::from_millis(self.poll_interval_ms)
    }

    pub fn scheduler_interval(&self) -> Duration {
        Duration::from_millis(self.scheduler_interval_ms)
    }

    pub fn recrawl_interval(&self) -> chrono::Duration {
        chrono::Duration::days(self.recrawl_interval_days)
    }
}
