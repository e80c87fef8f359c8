#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tempfile::TempDir;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;
use tosqa_core::crawler::CrawlConfig;
use tosqa_core::embedding::backend_from_spec;
use tosqa_core::index::build_document;
use tosqa_core::{DocumentDraft, TosDocument};
use tosqa_service::{AppState, ServiceConfig};

pub const WORDS: &[&str] = &[
    "account", "data", "share", "third", "parties", "cookies", "delete", "arbitration", "license", "content",
    "payment", "refund", "minor", "suspend", "advertising", "partners", "email", "location", "retention",
    "liability", "warranty", "court", "notice", "subscription", "trial", "device", "consent", "profile",
    "security", "breach", "export", "transfer", "jurisdiction", "copyright", "trademark", "feedback",
];

pub fn random_sentence(rng: &mut StdRng) -> String {
    let n = rng.random_range(4..12);
    let words: Vec<&str> = (0..n).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect();
    let mut s = words.join(" ");
    s[..1].make_ascii_uppercase();
    s.push('.');
    s
}

pub fn random_markdown(seed: u64, n: usize) -> String {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n).map(|_| random_sentence(&mut rng) + "\n\n").collect()
}

/// A document encoded with the service's configured backend.
pub fn document(config: &ServiceConfig, platform_id: &str, markdown: String) -> TosDocument {
    let embedder = backend_from_spec(&config.backend).unwrap();
    let draft = DocumentDraft::new(platform_id, markdown, vec![format!("https://{platform_id}.example/terms")]);
    build_document(draft, embedder.as_ref()).unwrap()
}

pub fn config(dir: &TempDir) -> ServiceConfig {
    ServiceConfig {
        listen_addr: "127.0.0.1:0".parse().unwrap(),
        data_dir: dir.path().join("data"),
        poll_interval_ms: 200,
        crawl: CrawlConfig { politeness_delay_ms: 0, request_timeout_ms: 2_000, max_pages: 10, ..CrawlConfig::default() },
        ..ServiceConfig::default()
    }
}

pub struct Running {
    pub base: String,
    pub state: Arc<AppState>,
    pub client: reqwest::Client,
    stop: Option<oneshot::Sender<()>>,
    handle: Option<JoinHandle<std::io::Result<()>>>,
    pub dir: TempDir,
}

impl Running {
    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    pub async fn get_json(&self, path: &str) -> (u16, serde_json::Value) {
        let resp = self.client.get(self.url(path)).send().await.unwrap();
        (resp.status().as_u16(), resp.json().await.unwrap())
    }

    pub async fn post_json(&self, path: &str, body: serde_json::Value) -> (u16, serde_json::Value) {
        let resp = self.client.post(self.url(path)).json(&body).send().await.unwrap();
        (resp.status().as_u16(), resp.json().await.unwrap())
    }

    pub async fn status_of(&self, platform_id: &str) -> String {
        let (_, v) = self.get_json(&format!("/api/platforms/{platform_id}")).await;
        v["status"].as_str().unwrap().to_owned()
    }

    pub async fn shutdown(mut self) -> TempDir {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(handle) = self.handle.take() {
            tokio::time::timeout(Duration::from_secs(10), handle).await.unwrap().unwrap().unwrap();
        }
        std::mem::replace(&mut self.dir, tempfile::tempdir().unwrap())
    }
}

/// Starts the service on an ephemeral port. `prepare` may seed the state
/// before the worker and listener start.
pub async fn start(dir: TempDir, config: ServiceConfig, prepare: impl FnOnce(&AppState) + Send + 'static) -> Running {
    let state = tokio::task::spawn_blocking(move || {
        let state = AppState::open(config).unwrap();
        prepare(&state);
        state
    })
    .await
    .unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let (tx, rx) = oneshot::channel::<()>();
    let handle = tokio::spawn(tosqa_service::run(Arc::clone(&state), listener, async {
        let _ = rx.await;
    }));
    Running { base, state, client: reqwest::Client::new(), stop: Some(tx), handle: Some(handle), dir }
}
