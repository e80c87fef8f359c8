//! Per-query runtime metrics and system CPU/RAM sampling.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sysinfo::System;
use tosqa_core::qa::StageTimings;

/// Queries kept for `GET /api/metrics`.
pub const METRICS_CAPACITY: usize = 1_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    /// Request receipt to response construction.
    pub latency_ms: f64,
    /// Question encoding, retrieval scan and relevance verification.
    pub timing_ms: f64,
    pub cpu_percent: f64,
    pub ram_percent: f64,
    pub sampled_at: DateTime<Utc>,
    pub stages: StageTimings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemSample {
    pub cpu_percent: f64,
    pub ram_percent: f64,
}

struct SamplerState {
    system: System,
    last_cpu_refresh: Instant,
    cpu_percent: f64,
}

/// System-wide CPU and RAM usage. CPU usage is measured between
/// refreshes, so readings closer together than sysinfo's minimum update
/// interval return the previous value.
pub struct SystemSampler {
    state: Mutex<SamplerState>,
}

impl std::fmt::Debug for SystemSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SystemSampler").finish_non_exhaustive()
    }
}

impl Default for SystemSampler {
    fn default() -> Self {
        Self::new()
    }
}

impl SystemSampler {
    pub fn new() -> Self {
        let mut system = System::new();
        system.refresh_cpu_usage();
        system.refresh_memory();
        Self { state: Mutex::new(SamplerState { system, last_cpu_refresh: Instant::now(), cpu_percent: 0.0 }) }
    }

    pub fn sample(&self) -> SystemSample {
        let mut s = self.state.lock().unwrap_or_else(|e| e.into_inner());
        if s.last_cpu_refresh.elapsed() >= sysinfo::MINIMUM_CPU_UPDATE_INTERVAL {
            s.system.refresh_cpu_usage();
            s.cpu_percent = f64::from(s.system.global_cpu_usage()).clamp(0.0, 100.0);
            s.last_cpu_refresh = Instant::now();
        }
        s.system.refresh_memory();
        let total = s.system.total_memory();
        let ram_percent = if total == 0 {
            0.0
        } else {
            // Same definition as psutil: memory not available to new work.
            (total.saturating_sub(s.system.available_memory())) as f64 / total as f64 * 100.0
        };
        SystemSample { cpu_percent: s.cpu_percent, ram_percent }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub count: usize,
    pub mean_latency_ms: f64,
    pub p95_latency_ms: f64,
    pub mean_timing_ms: f64,
    pub mean_cpu_percent: f64,
    pub mean_ram_percent: f64,
}

/// Nearest-rank percentile of an unsorted sample; 0 when empty.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn summarize(entries: &[QueryMetrics]) -> MetricsSummary {
    if entries.is_empty() {
        return MetricsSummary::default();
    }
    let n = entries.len() as f64;
    let mean = |f: fn(&QueryMetrics) -> f64| entries.iter().map(f).sum::<f64>() / n;
    let latencies: Vec<f64> = entries.iter().map(|m| m.latency_ms).collect();
    MetricsSummary {
        count: entries.len(),
        mean_latency_ms: mean(|m| m.latency_ms),
        p95_latency_ms: percentile(&latencies, 95.0),
        mean_timing_ms: mean(|m| m.timing_ms),
        mean_cpu_percent: mean(|m| m.cpu_percent),
        mean_ram_percent: mean(|m| m.ram_percent),
    }
}

/// Bounded log of recent query metrics.
#[derive(Debug)]
pub struct MetricsLog {
    entries: Mutex<VecDeque<QueryMetrics>>,
    capacity: usize,
    total: Mutex<u64>,
}

impl Default for MetricsLog {
    fn default() -> Self {
        Self::with_capacity(METRICS_CAPACITY)
    }
}

impl MetricsLog {
    pub fn with_capacity(capacity: usize) -> Self {
        Self { entries: Mutex::new(VecDeque::with_capacity(capacity)), capacity: capacity.max(1), total: Mutex::new(0) }
    }

    pub fn record(&self, m: QueryMetrics) {
        let mut entries = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        if entries.len() == self.capacity {
            entries.pop_front();
        }
        entries.push_back(m);
        *self.total.lock().unwrap_or_else(|e| e.into_inner()) += 1;
    }

    pub fn recent(&self) -> Vec<QueryMetrics> {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).iter().cloned().collect()
    }

    /// Queries recorded since start, including those evicted from the log.
    pub fn total(&self) -> u64 {
        *self.total.lock().unwrap_or_else(|e| e.into_inner())
    }
}

pub(crate) fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}
