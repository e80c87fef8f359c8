//! Repeated-query benchmark in the latency / CPU / RAM / timing layout.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tosqa_core::qep::tables::Table;

use crate::error::{ApiError, ErrorBody};
use crate::state::{AppState, QueryRequest, QueryResponse};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub latency_ms: f64,
    pub cpu_percent: f64,
    pub ram_percent: f64,
    pub timing_ms: f64,
}

impl BenchRow {
    fn of(r: &QueryResponse) -> Self {
        Self {
            latency_ms: r.metrics.latency_ms,
            cpu_percent: r.metrics.cpu_percent,
            ram_percent: r.metrics.ram_percent,
            timing_ms: r.metrics.timing_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub platform_id: String,
    pub question: String,
    pub runs: Vec<BenchRow>,
    pub mean: BenchRow,
    /// Answer payloads of all runs were identical.
    pub answers_identical: bool,
}

impl BenchReport {
    fn from_responses(platform_id: &str, question: &str, responses: &[QueryResponse]) -> Self {
        let runs: Vec<BenchRow> = responses.iter().map(BenchRow::of).collect();
        let n = runs.len().max(1) as f64;
        let mean_of = |f: fn(&BenchRow) -> f64| runs.iter().map(f).sum::<f64>() / n;
        let mean = BenchRow {
            latency_ms: mean_of(|r| r.latency_ms),
            cpu_percent: mean_of(|r| r.cpu_percent),
            ram_percent: mean_of(|r| r.ram_percent),
            timing_ms: mean_of(|r| r.timing_ms),
        };
        let key = |r: &QueryResponse| (r.answer.clone(), r.sentence_id, r.similarity.to_bits(), r.relevance.to_bits(), r.accepted);
        let answers_identical = responses.windows(2).all(|w| key(&w[0]) == key(&w[1]));
        Self { platform_id: platform_id.to_owned(), question: question.to_owned(), runs, mean, answers_identical }
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(
            ["Platform", "Run", "Latency (ms)", "CPU (%)", "RAM (%)", "Timing (ms)"].map(String::from).to_vec(),
        );
        let row = |label: String, r: &BenchRow| {
            vec![
                self.platform_id.clone(),
                label,
                format!("{:.3}", r.latency_ms),
                format!("{:.1}", r.cpu_percent),
                format!("{:.1}", r.ram_percent),
                format!("{:.3}", r.timing_ms),
            ]
        };
        for (i, r) in self.runs.iter().enumerate() {
            t.push(row((i + 1).to_string(), r));
        }
        t.push(row("mean".into(), &self.mean));
        t
    }
}

fn request(platform_id: &str, question: &str) -> QueryRequest {
    QueryRequest { platform_id: platform_id.to_owned(), question: question.to_owned(), tau: None }
}

/// Runs the query path in-process `repeat` times.
pub fn run_in_process(state: &AppState, platform_id: &str, question: &str, repeat: usize) -> Result<BenchReport, ApiError> {
    let req = request(platform_id, question);
    let responses = (0..repeat.max(1)).map(|_| state.answer(&req, Instant::now())).collect::<Result<Vec<_>, _>>()?;
    Ok(BenchReport::from_responses(platform_id, question, &responses))
}

#[derive(Debug, thiserror::Error)]
pub enum RemoteBenchError {
    #[error("request to {url} failed: {reason}")]
    Transport { url: String, reason: String },
    #[error("service answered {status}: {code}: {message}")]
    Api { status: u16, code: String, message: String },
}

/// Sends `repeat` queries to a running service at `base_url`.
pub fn run_remote(base_url: &str, platform_id: &str, question: &str, repeat: usize) -> Result<BenchReport, RemoteBenchError> {
    let url = format!("{}/api/query", base_url.trim_end_matches('/'));
    let transport = |e: reqwest::Error| RemoteBenchError::Transport { url: url.clone(), reason: e.to_string() };
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(60))
        .user_agent(tosqa_core::USER_AGENT)
        .build()
        .map_err(transport)?;
    let req = request(platform_id, question);
    let mut responses = Vec::new();
    for _ in 0..repeat.max(1) {
        let resp = client.post(&url).json(&req).send().map_err(transport)?;
        let status = resp.status();
        if !status.is_success() {
            let body: ErrorBody = resp
                .json()
                .unwrap_or(ErrorBody { code: "unknown".into(), message: String::new() });
            return Err(RemoteBenchError::Api { status: status.as_u16(), code: body.code, message: body.message });
        }
        responses.push(resp.json::<QueryResponse>().map_err(transport)?);
    }
    Ok(BenchReport::from_responses(platform_id, question, &responses))
}
