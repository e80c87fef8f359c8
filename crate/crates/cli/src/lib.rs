//! `tosqa` command line: crawl, query, evaluate, benchmark and serve.
//!
//! Exit codes: 0 success; 1 failure (or no content for `crawl`);
//! 2 seed unreachable; 3 answer gated out; 4 platform not indexed;
//! 64 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::{ArgGroup, Args, Parser, Subcommand};
use tosqa_core::crawler::{crawl_platform, CrawlError, HttpFetcher};
use tosqa_core::index::build_document;
use tosqa_core::qep::synthetic::{planted_topics, SyntheticSpec};
use tosqa_core::qep::tables::{accuracy_table, Table};
use tosqa_core::qep::{
    fit_kmeans, identity_answer, run_qep, ClusterModel, ExternalGenerator, QepOptions, QepReport, QuestionGenerator,
    TemplateGenerator,
};
use tosqa_core::store::{is_valid_platform_id, platform_id_from_url, QueueSource, TosStore};
use tosqa_core::{DocumentDraft, EmbeddingVector, TosDocument};
use tosqa_service::{bench, engine_from_config, ApiError, AppState, QueryRequest, ServiceConfig};
use url::Url;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_SEED_UNREACHABLE: i32 = 2;
pub const EXIT_GATED: i32 = 3;
pub const EXIT_NOT_INDEXED: i32 = 4;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "tosqa", version, about = "Question answering over Terms of Service documents")]
struct Cli {
    /// JSON config file (defaults to $TOSQA_CONFIG, then built-in defaults).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's data_dir.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Crawl a platform's ToS pages and index them.
    Crawl(CrawlArgs),
    /// Ask a question against an indexed platform.
    Query(QueryArgs),
    /// Cluster-based answer evaluation.
    Qep(QepArgs),
    /// Run the HTTP service and crawl worker.
    Serve(ServeArgs),
    /// Repeat a query and report latency, CPU, RAM and timing.
    Bench(BenchArgs),
    /// List known platforms.
    List,
}

#[derive(Debug, Args)]
struct CrawlArgs {
    #[arg(long)]
    url: String,
    #[arg(long)]
    platform_id: Option<String>,
    #[arg(long)]
    display_name: Option<String>,
    #[arg(long)]
    max_depth: Option<u32>,
    #[arg(long)]
    max_pages: Option<usize>,
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(long)]
    platform: String,
    #[arg(long)]
    question: String,
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["platform", "corpus_dir", "synthetic"])))]
struct QepArgs {
    /// Evaluate a stored platform document.
    #[arg(long)]
    platform: Option<String>,
    /// Reference corpus: one .md or .txt file per platform. The model is fit
    /// on all of it; without --platform every file is evaluated.
    #[arg(long)]
    corpus_dir: Option<PathBuf>,
    /// Use the built-in planted-topic corpus.
    #[arg(long, conflicts_with_all = ["platform", "corpus_dir"])]
    synthetic: bool,
    /// Topics in the synthetic corpus.
    #[arg(long, default_value_t = 4, requires = "synthetic")]
    topics: usize,
    #[arg(long, default_value_t = 5, conflicts_with = "k_sweep")]
    k: usize,
    /// Comma-separated cluster counts, one table column each.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    k_sweep: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Load a fitted model instead of fitting one.
    #[arg(long, conflicts_with = "k_sweep")]
    model: Option<PathBuf>,
    #[arg(long, conflicts_with = "k_sweep")]
    save_model: Option<PathBuf>,
    /// Answer every question with its own source statement.
    #[arg(long)]
    identity_oracle: bool,
    /// Count gate-rejected answers as incorrect.
    #[arg(long)]
    strict: bool,
    /// Write the report(s) as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: bool,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Overrides the config's listen_addr.
    #[arg(long)]
    listen: Option<std::net::SocketAddr>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    platform: String,
    #[arg(long)]
    question: String,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    repeat: u64,
    /// Base URL of a running service; in-process when absent.
    #[arg(long)]
    server: Option<String>,
    #[arg(long)]
    csv: bool,
}

/// Failure with its exit code.
struct Exit(i32, String);

impl<E: std::fmt::Display> From<E> for Exit {
    fn from(e: E) -> Self {
        Exit(EXIT_FAILURE, e.to_string())
    }
}

type CmdResult = Result<i32, Exit>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    let result = load_config(&cli).map_err(Exit::from).and_then(|config| match cli.command {
        Command::Crawl(a) => crawl(config, a, out),
        Command::Query(a) => query(config, a, out),
        Command::Qep(a) => qep(config, a, out),
        Command::Serve(a) => serve(config, a),
        Command::Bench(a) => run_bench(config, a, out),
        Command::List => list(config, out),
    });
    match result {
        Ok(code) => code,
        Err(Exit(code, message)) => {
            let _ = writeln!(err, "error: {message}");
            code
        }
    }
}

fn load_config(cli: &Cli) -> Result<ServiceConfig, tosqa_service::config::ConfigError> {
    let mut config = match &cli.config {
        Some(path) => ServiceConfig::load(path)?,
        None => ServiceConfig::from_env()?,
    };
    if let Some(dir) = &cli.data_dir {
        config.data_dir = dir.clone();
    }
    Ok(config)
}

fn crawl(config: ServiceConfig, a: CrawlArgs, out: &mut dyn Write) -> CmdResult {
    let url = Url::parse(&a.url)
        .ok()
        .filter(|u| matches!(u.scheme(), "http" | "https"))
        .ok_or_else(|| Exit(EXIT_FAILURE, format!("invalid url {:?}", a.url)))?;
    let platform_id = match a.platform_id {
        Some(id) if is_valid_platform_id(&id) => id,
        Some(id) => return Err(Exit(EXIT_FAILURE, format!("invalid platform id {id:?}"))),
        None => platform_id_from_url(&url).ok_or_else(|| Exit(EXIT_FAILURE, format!("cannot derive a platform id from {url}")))?,
    };
    let engine = engine_from_config(&config)?;
    let store = TosStore::open(&config.data_dir)?.with_default_recrawl_interval(config.recrawl_interval());
    if let Some(name) = &a.display_name {
        store.register_platform(&platform_id, name, &url)?;
    }
    store.enqueue_crawl(&platform_id, url.as_str(), QueueSource::UserSubmission)?;
    store.claim(&platform_id)?;

    let mut crawl_config = config.crawl.clone();
    crawl_config.seed_url = url;
    crawl_config.max_depth = a.max_depth.unwrap_or(crawl_config.max_depth);
    crawl_config.max_pages = a.max_pages.unwrap_or(crawl_config.max_pages);
    let fetcher = HttpFetcher::new(Duration::from_millis(crawl_config.request_timeout_ms), crawl_config.same_origin_only)?;
    let outcome = match crawl_platform(&platform_id, &crawl_config, &fetcher) {
        Ok(outcome) => outcome,
        Err(e) => {
            store.mark_failed(&platform_id, &e.to_string())?;
            let code = match e {
                CrawlError::SeedUnreachable(_) => EXIT_SEED_UNREACHABLE,
                _ => EXIT_FAILURE,
            };
            return Err(Exit(code, e.to_string()));
        }
    };
    let (kept, skipped) = (outcome.kept(), outcome.skipped());
    for page in outcome.pages.iter().filter(|p| !p.is_kept()) {
        let reason = page.skipped_reason.map(|r| format!("{r:?}")).unwrap_or_default();
        writeln!(out, "skipped {} ({reason})", page.url)?;
    }
    let upserted = match store.upsert_document(outcome.draft, engine.embedder().as_ref()) {
        Ok(u) if u.sentence_count > 0 => u,
        Ok(_) => {
            store.mark_failed(&platform_id, "crawled pages contain no statements")?;
            return Err(Exit(EXIT_FAILURE, "crawled pages contain no statements".into()));
        }
        Err(e) => {
            store.mark_failed(&platform_id, &e.to_string())?;
            return Err(e.into());
        }
    };
    writeln!(out, "platform_id: {platform_id}")?;
    writeln!(out, "pages kept: {kept}")?;
    writeln!(out, "pages skipped: {skipped}")?;
    writeln!(out, "sentences: {}", upserted.sentence_count)?;
    Ok(EXIT_OK)
}

fn query(config: ServiceConfig, a: QueryArgs, out: &mut dyn Write) -> CmdResult {
    let state = AppState::open(config)?;
    let req = QueryRequest { platform_id: a.platform, question: a.question, tau: a.tau };
    let resp = state.answer(&req, Instant::now()).map_err(|e| match e {
        ApiError::PlatformNotIndexed(_) => Exit(EXIT_NOT_INDEXED, e.to_string()),
        other => other.into(),
    })?;
    match &resp.fallback {
        None => writeln!(out, "answer: {}", resp.answer)?,
        Some(fallback) => {
            writeln!(out, "{fallback}")?;
            writeln!(out, "closest statement: {}", resp.answer)?;
        }
    }
    writeln!(out, "similarity: {:.4}", resp.similarity)?;
    writeln!(out, "relevance: {:.4}", resp.relevance)?;
    Ok(if resp.accepted { EXIT_OK } else { EXIT_GATED })
}

/// Documents from `.md` / `.txt` files, sorted by file name. Platform ids
/// come from the file stems.
fn load_corpus_dir(dir: &Path, config: &ServiceConfig) -> Result<Vec<TosDocument>, Exit> {
    let embedder = engine_from_config(config)?.embedder().clone();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Exit(EXIT_FAILURE, format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "md" || x == "txt"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Exit(EXIT_FAILURE, format!("no .md or .txt files in {}", dir.display())));
    }
    paths
        .iter()
        .map(|path| {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_lowercase();
            let id = stem.split(|c: char| !c.is_ascii_alphanumeric()).filter(|p| !p.is_empty()).collect::<Vec<_>>().join("-");
            if !is_valid_platform_id(&id) {
                return Err(Exit(EXIT_FAILURE, format!("cannot derive a platform id from {}", path.display())));
            }
            let text = std::fs::read_to_string(path)?;
            Ok(build_document(DocumentDraft::new(id, text, vec![path.display().to_string()]), embedder.as_ref())?)
        })
        .collect()
}

fn qep(config: ServiceConfig, a: QepArgs, out: &mut dyn Write) -> CmdResult {
    let engine = engine_from_config(&config)?;
    let (reference, targets): (Vec<TosDocument>, Vec<TosDocument>) = if a.synthetic {
        let corpus = planted_topics(SyntheticSpec { topics: a.topics, ..SyntheticSpec::default() });
        let doc = build_document(DocumentDraft::new("synthetic", corpus.markdown(), vec![]), engine.embedder().as_ref())?;
        (vec![doc.clone()], vec![doc])
    } else {
        let corpus = a.corpus_dir.as_deref().map(|d| load_corpus_dir(d, &config)).transpose()?;
        match (&a.platform, corpus) {
            (Some(id), corpus) => {
                let store = TosStore::open(&config.data_dir)?;
                let doc = store
                    .document(id)
                    .ok_or_else(|| Exit(EXIT_FAILURE, format!("platform {id:?} has no indexed document")))?;
                let doc = TosDocument::clone(&doc);
                (corpus.unwrap_or_else(|| vec![doc.clone()]), vec![doc])
            }
            (None, Some(corpus)) => (corpus.clone(), corpus),
            (None, None) => unreachable!("clap requires a source"),
        }
    };
    let points: Vec<EmbeddingVector> = reference.iter().flat_map(|d| d.sentences.iter().map(|s| s.embedding.clone())).collect();

    let models: Vec<ClusterModel> = match (&a.model, &a.k_sweep) {
        (Some(path), _) => vec![serde_json::from_slice(&std::fs::read(path)?)?],
        (None, Some(ks)) => ks.iter().map(|&k| fit_kmeans(&points, k, a.seed)).collect::<Result<_, _>>()?,
        (None, None) => vec![fit_kmeans(&points, a.k, a.seed)?],
    };
    if let (Some(path), [model]) = (&a.save_model, models.as_slice()) {
        std::fs::write(path, serde_json::to_vec_pretty(model)?)?;
    }

    let generator: Box<dyn QuestionGenerator> = match &config.question_endpoint {
        Some(endpoint) => Box::new(ExternalGenerator::new(endpoint.clone())),
        None => Box::new(TemplateGenerator),
    };
    let options = QepOptions { count_rejected_as_incorrect: a.strict };
    let mut reports: Vec<QepReport> = Vec::new();
    for doc in &targets {
        for model in &models {
            let report = if a.identity_oracle {
                run_qep(doc, model, |id, _| identity_answer(doc, id), generator.as_ref(), options)?
            } else {
                run_qep(doc, model, |_, q| engine.answer(q, doc), generator.as_ref(), options)?
            };
            reports.push(report);
        }
    }

    if let Some(path) = &a.out {
        let json = match reports.as_slice() {
            [single] => serde_json::to_vec_pretty(single)?,
            many => serde_json::to_vec_pretty(many)?,
        };
        std::fs::write(path, json)?;
    }
    let table = accuracy_table(&reports);
    write!(out, "{}", if a.csv { table.to_csv() } else { table.to_text() })?;
    for r in &reports {
        writeln!(
            out,
            "{} k={}: {}/{} correct, accuracy {:.3}, {} rejected, {} skipped",
            r.platform_id, r.k, r.n_correct, r.n_questions, r.accuracy, r.n_rejected, r.n_skipped
        )?;
    }
    Ok(EXIT_OK)
}

fn serve(mut config: ServiceConfig, a: ServeArgs) -> CmdResult {
    if let Some(addr) = a.listen {
        config.listen_addr = addr;
    }
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .try_init();
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(tosqa_service::serve(config))?;
    Ok(EXIT_OK)
}

fn run_bench(config: ServiceConfig, a: BenchArgs, out: &mut dyn Write) -> CmdResult {
    let repeat = a.repeat as usize;
    let report = match &a.server {
        Some(base) => bench::run_remote(base, &a.platform, &a.question, repeat)?,
        None => {
            let state = AppState::open(config)?;
            bench::run_in_process(&state, &a.platform, &a.question, repeat)?
        }
    };
    let table = report.table();
    write!(out, "{}", if a.csv { table.to_csv() } else { table.to_text() })?;
    Ok(EXIT_OK)
}

fn list(config: ServiceConfig, out: &mut dyn Write) -> CmdResult {
    let store = Arc::new(TosStore::open(&config.data_dir)?);
    let mut table = Table::new(["Platform", "Status", "Statements", "Last crawled", "Failure"].map(String::from).to_vec());
    for p in store.platforms() {
        table.push(vec![
            p.platform_id.clone(),
            p.status.as_str().to_owned(),
            p.document.as_ref().map_or(0, |d| d.sentence_count).to_string(),
            p.last_crawled_at.map(|t| t.to_rfc3339()).unwrap_or_else(|| "-".into()),
            p.failure_reason.clone().unwrap_or_else(|| "-".into()),
        ]);
    }
    write!(out, "{}", table.to_text())?;
    Ok(EXIT_OK)
}
