//! Background crawl worker: drains the store's FIFO queue and runs the
//! recrawl scheduler.

use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tokio::sync::watch;
use tokio::time::MissedTickBehavior;
use tosqa_core::crawler::{crawl_platform, CrawlConfig, HttpFetcher};
use tosqa_core::store::{CrawlQueueEntry, PlatformStatus, QueueSource, TosStore};
use tosqa_core::{segment_sentences, Embedder};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum JobResult {
    Indexed { sentence_count: usize, reused_embeddings: bool },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobRecord {
    pub entry_id: u64,
    pub platform_id: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    #[serde(flatten)]
    pub result: JobResult,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerStats {
    pub jobs_indexed: u64,
    pub jobs_failed: u64,
    pub scheduler_runs: u64,
    pub last_job: Option<JobRecord>,
}

pub struct Worker {
    store: Arc<TosStore>,
    embedder: Arc<dyn Embedder>,
    crawl: CrawlConfig,
    concurrency: usize,
    stats: Mutex<WorkerStats>,
}

impl std::fmt::Debug for Worker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Worker").field("crawl", &self.crawl).field("concurrency", &self.concurrency).finish()
    }
}

impl Worker {
    pub fn new(store: Arc<TosStore>, embedder: Arc<dyn Embedder>, crawl: CrawlConfig, concurrency: usize) -> Self {
        Self { store, embedder, crawl, concurrency: concurrency.max(1), stats: Mutex::new(WorkerStats::default()) }
    }

    pub fn stats(&self) -> WorkerStats {
        self.stats.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Runs one dequeued job to completion. Blocking. Failures are recorded
    /// on the platform, never returned.
    pub fn process(&self, entry: &CrawlQueueEntry) -> JobRecord {
        let started_at = Utc::now();
        let result = match self.crawl_and_index(entry) {
            Ok(outcome) => outcome,
            Err(reason) => {
                self.fail(&entry.platform_id, &reason);
                JobResult::Failed { reason }
            }
        };
        let record = JobRecord {
            entry_id: entry.entry_id,
            platform_id: entry.platform_id.clone(),
            started_at,
            finished_at: Utc::now(),
            result,
        };
        self.note(&record);
        record
    }

    fn crawl_and_index(&self, entry: &CrawlQueueEntry) -> Result<JobResult, String> {
        let config = CrawlConfig { seed_url: entry.seed_url.clone(), ..self.crawl.clone() };
        let fetcher = HttpFetcher::new(Duration::from_millis(config.request_timeout_ms), config.same_origin_only)
            .map_err(|e| e.to_string())?;
        let outcome = crawl_platform(&entry.platform_id, &config, &fetcher).map_err(|e| e.to_string())?;
        if segment_sentences(&outcome.draft.merged_markdown).is_empty() {
            return Err("crawled pages contain no statements".into());
        }
        let up = self.store.upsert_document(outcome.draft, self.embedder.as_ref()).map_err(|e| e.to_string())?;
        tracing::info!(platform = %entry.platform_id, sentences = up.sentence_count, "indexed");
        Ok(JobResult::Indexed { sentence_count: up.sentence_count, reused_embeddings: up.reused_embeddings })
    }

    fn fail(&self, platform_id: &str, reason: &str) {
        tracing::warn!(platform = %platform_id, "crawl failed: {reason}");
        if let Err(e) = self.store.mark_failed(platform_id, reason) {
            tracing::error!(platform = %platform_id, "cannot record failure: {e}");
        }
    }

    fn note(&self, record: &JobRecord) {
        let mut stats = self.stats.lock().unwrap_or_else(|e| e.into_inner());
        match record.result {
            JobResult::Indexed { .. } => stats.jobs_indexed += 1,
            JobResult::Failed { .. } => stats.jobs_failed += 1,
        }
        stats.last_job = Some(record.clone());
    }

    /// Platforms left `crawling` by a process that died mid-job are marked
    /// failed and queued again.
    pub fn recover_interrupted(&self) -> Vec<String> {
        let mut recovered = Vec::new();
        for p in self.store.platforms() {
            if p.status != PlatformStatus::Crawling {
                continue;
            }
            self.fail(&p.platform_id, "interrupted by a service restart");
            match self.store.enqueue_crawl(&p.platform_id, p.seed_url.as_str(), QueueSource::RecrawlScheduler) {
                Ok(_) => recovered.push(p.platform_id),
                Err(e) => tracing::error!(platform = %p.platform_id, "cannot requeue: {e}"),
            }
        }
        recovered
    }

    pub fn schedule(&self, now: DateTime<Utc>) -> usize {
        self.stats.lock().unwrap_or_else(|e| e.into_inner()).scheduler_runs += 1;
        match self.store.schedule_recrawls(now) {
            Ok(entries) => entries.len(),
            Err(e) => {
                tracing::error!("recrawl scheduling failed: {e}");
                0
            }
        }
    }

    /// Processes queued entries until the queue is empty, up to
    /// `concurrency` jobs at a time. Returns the number of jobs run.
    pub async fn drain(self: &Arc<Self>, shutdown: &watch::Receiver<bool>) -> usize {
        let mut done = 0;
        while !*shutdown.borrow() {
            let mut batch = Vec::new();
            while batch.len() < self.concurrency {
                match self.store.dequeue() {
                    Ok(Some(entry)) => batch.push(entry),
                    Ok(None) => break,
                    Err(e) => {
                        tracing::error!("dequeue failed: {e}");
                        break;
                    }
                }
            }
            if batch.is_empty() {
                break;
            }
            let jobs: Vec<_> = batch
                .into_iter()
                .map(|entry| {
                    let worker = Arc::clone(self);
                    let platform_id = entry.platform_id.clone();
                    (platform_id, tokio::task::spawn_blocking(move || worker.process(&entry)))
                })
                .collect();
            for (platform_id, job) in jobs {
                if let Err(e) = job.await {
                    // A panicking job must not take the loop down.
                    self.fail(&platform_id, &format!("crawl job aborted: {e}"));
                }
                done += 1;
            }
        }
        done
    }

    /// The service-lifetime loop: drains the queue every `poll` and runs the
    /// recrawl scheduler every `scheduler_tick`, until `shutdown` flips.
    pub async fn run(self: Arc<Self>, poll: Duration, scheduler_tick: Duration, mut shutdown: watch::Receiver<bool>) {
        let recovered = self.recover_interrupted();
        if !recovered.is_empty() {
            tracing::warn!(?recovered, "requeued interrupted crawls");
        }
        let mut poll_timer = tokio::time::interval(poll);
        poll_timer.set_missed_tick_behavior(MissedTickBehavior::Delay);
        let mut scheduler_timer = tokio::time::interval(scheduler_tick);
        scheduler_timer.set_missed_tick_behavior(MissedTickBehavior::Delay);
        loop {
            tokio::select! {
                changed = shutdown.changed() => {
                    if changed.is_err() || *shutdown.borrow() {
                        break;
                    }
                }
                _ = scheduler_timer.tick() => {
                    let worker = Arc::clone(&self);
                    let queued = tokio::task::spawn_blocking(move || worker.schedule(Utc::now())).await.unwrap_or(0);
                    if queued > 0 {
                        tracing::info!(queued, "recrawls scheduled");
                    }
                }
                _ = poll_timer.tick() => {
                    self.drain(&shutdown).await;
                }
            }
        }
        tracing::info!("worker stopped");
    }
}
