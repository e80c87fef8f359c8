//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any failed.

mod common;

use std::collections::{BTreeSet, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::json;
use tosqa_core::crawler::{crawl_platform, CrawlConfig, HttpFetcher, SkipReason};
use tosqa_core::embedding::ReferenceEmbedder;
use tosqa_core::index::build_document;
use tosqa_core::qep::synthetic::{planted_topics, SyntheticSpec};
use tosqa_core::qep::{fit_kmeans, fit_kmeans_points, identity_answer, run_qep, QepOptions, TemplateGenerator};
use tosqa_core::store::{read_embeddings_file, TosStore};
use tosqa_core::text::content_tokens;
use tosqa_core::{retrieve_best, Answer, ContentHash, DocumentDraft, Embedder, QaEngine, TosDocument};
use tosqa_service::metrics::percentile;
use tosqa_testkit::oracle::{argmax_cosine, best_permutation_agreement, exhaustive_kmeans};
use tosqa_testkit::site::{self, CAREERS_MARKER, LOGIN_MARKER, PRIVACY_SENTENCES, TERMS_SENTENCES};
use tosqa_testkit::{FixtureServer, LoggedRequest, Route};
use url::Url;

use common::{random_sentence, start};

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

const RELOAD_ENV: &str = "TOSQA_ACCEPTANCE_RELOAD";

fn main() {
    if let Ok(dir) = std::env::var(RELOAD_ENV) {
        reload_child(&dir);
        return;
    }
    let criteria: &[(&str, Criterion)] = &[
        ("retrieval oracle equivalence", retrieval_oracle),
        ("gate law", gate_law),
        ("exact-sentence recovery", exact_sentence_recovery),
        ("k-means correctness", kmeans_correctness),
        ("planted-topic recovery", planted_topic_recovery),
        ("QEP end-to-end", qep_end_to_end),
        ("QEP report consistency", qep_report_consistency),
        ("crawler fixture", crawler_fixture),
        ("persistence round-trip", persistence_round_trip),
        ("query latency", query_latency),
        ("worker state machine", worker_state_machine),
    ];
    let mut failed = 0;
    for (name, criterion) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(criterion)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} ({secs:.2}s)"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} ({secs:.2}s)");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn doc_from(markdown: String, embedder: &dyn Embedder) -> TosDocument {
    build_document(DocumentDraft::new("p", markdown, vec![]), embedder).unwrap()
}

fn random_doc(rng: &mut StdRng, n: usize, embedder: &dyn Embedder) -> TosDocument {
    doc_from((0..n).map(|_| random_sentence(rng) + "\n\n").collect(), embedder)
}

fn retrieval_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(634);
    let (mut queries, mut sentences) = (0usize, 0usize);
    for corpus in 0..200u64 {
        let e = ReferenceEmbedder::new(corpus % 10, 384);
        let n = rng.random_range(10..=1000);
        let doc = random_doc(&mut rng, n, &e);
        sentences += doc.sentences.len();
        let rows: Vec<Vec<f64>> = doc.sentences.iter().map(|s| s.embedding.values().to_vec()).collect();
        for i in 0..10 {
            // Mix fresh questions with questions copied from the corpus.
            let q = if i % 2 == 0 {
                random_sentence(&mut rng)
            } else {
                doc.sentences[rng.random_range(0..doc.sentences.len())].text.clone()
            };
            let qv = e.embed(&q).unwrap();
            let (id, sim) = retrieve_best(&qv, doc.index()).unwrap();
            let (want, want_sim) = argmax_cosine(qv.values(), &rows);
            ensure!(id == want, "corpus {corpus}: retrieved {id}, brute force {want} for {q:?}");
            ensure!((sim - want_sim).abs() < 1e-12, "corpus {corpus}: similarity {sim} vs {want_sim}");
            queries += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "took {secs:.1}s");
    Ok(format!("{queries}/{queries} queries match brute force over 200 corpora ({sentences} sentences)"))
}

fn gate_law() -> Outcome {
    let started = Instant::now();
    let e: Arc<dyn Embedder> = Arc::new(ReferenceEmbedder::new(42, 384));
    let engine = QaEngine::reference(Arc::clone(&e));
    let mut rng = StdRng::seed_from_u64(635);
    let docs: Vec<TosDocument> = (0..40).map(|_| {
        let n = rng.random_range(5..40);
        random_doc(&mut rng, n, e.as_ref())
    }).collect();
    let (mut accepted, mut at_boundary) = (0, 0);
    for i in 0..10_000 {
        let doc = &docs[rng.random_range(0..docs.len())];
        let question = random_sentence(&mut rng).replace('.', "?");
        let probe = engine.answer_with_tau(&question, doc, 0.0).map_err(|e| e.to_string())?.0;
        // One triple in five sits exactly on the threshold.
        let tau = if i % 5 == 0 { probe.relevance } else { rng.random_range(0.0..=1.0) };
        let (a, _) = engine.answer_with_tau(&question, doc, tau).map_err(|e| e.to_string())?;
        ensure!(a.accepted == (a.relevance >= tau), "accepted={} relevance={} tau={tau}", a.accepted, a.relevance);
        ensure!(a.accepted == a.fallback_message.is_none(), "fallback disagrees with the gate");
        ensure!(a.sentence_id == probe.sentence_id && a.relevance == probe.relevance, "tau changed the retrieved statement");
        let higher = rng.random_range(tau..=1.0);
        let (b, _) = engine.answer_with_tau(&question, doc, higher).map_err(|e| e.to_string())?;
        ensure!(!(b.accepted && !a.accepted), "reject at tau={tau} became accept at {higher}");
        accepted += usize::from(a.accepted);
        at_boundary += usize::from(tau == a.relevance);
    }
    let secs = started.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.1}s");
    Ok(format!("10000 triples hold the law ({accepted} accepted, {at_boundary} at tau = relevance), monotone in tau"))
}

fn exact_sentence_recovery() -> Outcome {
    let e: Arc<dyn Embedder> = Arc::new(ReferenceEmbedder::new(42, 384));
    let mut rng = StdRng::seed_from_u64(636);
    // Distinct token sets, so no two statements embed to the same vector.
    let mut seen = HashSet::new();
    let mut md = String::new();
    while seen.len() < 500 {
        let s = random_sentence(&mut rng);
        if seen.insert(content_tokens(&s).into_iter().collect::<BTreeSet<_>>()) {
            md.push_str(&s);
            md.push_str("\n\n");
        }
    }
    let doc = doc_from(md, e.as_ref());
    ensure!(doc.sentences.len() == 500, "segmented into {} statements", doc.sentences.len());
    let engine = QaEngine::reference(e);
    let mut min_sim = f64::INFINITY;
    for s in &doc.sentences {
        let a = engine.answer(&s.text, &doc).map_err(|e| e.to_string())?;
        ensure!(a.sentence_id == s.sentence_id && a.text == s.text, "{:?} answered with {:?}", s.text, a.text);
        ensure!(a.similarity >= 0.999, "similarity {} for {:?}", a.similarity, s.text);
        ensure!(a.relevance == 1.0 && a.accepted, "relevance {} for {:?}", a.relevance, s.text);
        min_sim = min_sim.min(a.similarity);
    }
    Ok(format!("500/500 statements recover themselves, min similarity {min_sim:.15}"))
}

fn non_increasing(history: &[f64]) -> bool {
    history.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0))
}

fn kmeans_correctness() -> Outcome {
    let four = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![10.0, 0.0], vec![10.0, 1.0]];
    let (optimum, _) = exhaustive_kmeans(&four, 2);
    ensure!(optimum == 1.0, "exhaustive optimum {optimum}");
    let model = fit_kmeans_points(&four, 2, 0).map_err(|e| e.to_string())?;
    let mut centroids = model.centroids.clone();
    centroids.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ensure!(centroids == vec![vec![0.0, 0.5], vec![10.0, 0.5]], "centroids {centroids:?}");
    ensure!(model.inertia == 1.0, "inertia {}", model.inertia);

    let mut rng = StdRng::seed_from_u64(2024);
    let (mut hits, mut monotone, mut misses) = (0, 0, Vec::new());
    for run in 0..20 {
        let n = rng.random_range(4..=12);
        let k = rng.random_range(2..=3);
        let points: Vec<Vec<f64>> =
            (0..n).map(|_| vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]).collect();
        let (optimum, _) = exhaustive_kmeans(&points, k);
        let model = fit_kmeans_points(&points, k, rng.random()).map_err(|e| e.to_string())?;
        monotone += usize::from(non_increasing(&model.inertia_history));
        ensure!(model.inertia >= optimum - 1e-9, "run {run}: inertia {} below optimum {optimum}", model.inertia);
        if (model.inertia - optimum).abs() <= 1e-9 {
            hits += 1;
        } else {
            misses.push(format!("run {run} (n={n}, k={k}): {:.6} vs {optimum:.6}", model.inertia));
        }
    }
    ensure!(monotone == 20, "inertia non-increasing in {monotone}/20");
    ensure!(hits >= 16, "{hits}/20 at the optimum; misses: {}", misses.join("; "));
    let missed = if misses.is_empty() { String::new() } else { format!("; local optima: {}", misses.join("; ")) };
    Ok(format!("4-point example exact; {hits}/20 at the exhaustive optimum, 20/20 monotone{missed}"))
}

fn planted_topic_recovery() -> Outcome {
    let started = Instant::now();
    let corpus = planted_topics(SyntheticSpec::default());
    ensure!(corpus.sentences.len() == 200, "corpus has {} sentences", corpus.sentences.len());
    let e = ReferenceEmbedder::new(42, 384);
    let refs: Vec<&str> = corpus.sentences.iter().map(String::as_str).collect();
    let vectors = e.embed_batch(&refs).map_err(|e| e.to_string())?;
    let model = fit_kmeans(&vectors, 4, 7).map_err(|e| e.to_string())?;
    let found: Vec<usize> = vectors.iter().map(|v| model.assign(v).unwrap()).collect();
    let agreement = best_permutation_agreement(&corpus.labels, &found, 4);
    let secs = started.elapsed().as_secs_f64();
    ensure!(agreement >= 0.95, "agreement {agreement}");
    ensure!(secs < 10.0, "took {secs:.1}s");
    Ok(format!("best-permutation agreement {agreement:.3}"))
}

fn synthetic_doc(spec: SyntheticSpec, e: &dyn Embedder) -> TosDocument {
    build_document(DocumentDraft::new("synthetic", planted_topics(spec).markdown(), vec![]), e).unwrap()
}

fn vectors(doc: &TosDocument) -> Vec<tosqa_core::EmbeddingVector> {
    doc.sentences.iter().map(|s| s.embedding.clone()).collect()
}

fn answer_for(doc: &TosDocument, id: usize, accepted: bool) -> Answer {
    let s = &doc.sentences[id];
    Answer { sentence_id: id, text: s.text.clone(), similarity: 0.0, relevance: 0.0, accepted, fallback_message: None }
}

fn qep_end_to_end() -> Outcome {
    let e: Arc<dyn Embedder> = Arc::new(ReferenceEmbedder::new(42, 384));
    let doc = synthetic_doc(SyntheticSpec::default(), e.as_ref());
    let model = fit_kmeans(&vectors(&doc), 4, 7).map_err(|e| e.to_string())?;
    let engine = QaEngine::reference(Arc::clone(&e));
    let real = run_qep(&doc, &model, |_, q| engine.answer(q, &doc), &TemplateGenerator, QepOptions::default())
        .map_err(|e| e.to_string())?;
    ensure!(real.accuracy >= 0.90, "real engine accuracy {}", real.accuracy);
    let ideal = run_qep(&doc, &model, |id, _| identity_answer(&doc, id), &TemplateGenerator, QepOptions::default())
        .map_err(|e| e.to_string())?;
    ensure!(ideal.accuracy == 1.0, "identity oracle accuracy {}", ideal.accuracy);

    let small = ReferenceEmbedder::new(42, 128);
    let mut chance = Vec::new();
    for k in [2usize, 4, 8] {
        let spec = SyntheticSpec { topics: k, sentences_per_topic: 2000 / k, seed: k as u64, ..SyntheticSpec::default() };
        let doc = synthetic_doc(spec, &small);
        let model = fit_kmeans(&vectors(&doc), k, 3).map_err(|e| e.to_string())?;
        let shares: Vec<f64> = {
            let mut counts = vec![0usize; k];
            for s in &doc.sentences {
                counts[model.assign(&s.embedding).unwrap()] += 1;
            }
            counts.iter().map(|&c| c as f64 / doc.sentences.len() as f64).collect()
        };
        ensure!(shares.iter().all(|s| (s - 1.0 / k as f64).abs() < 0.02), "k={k}: clusters not balanced {shares:?}");
        let mut rng = StdRng::seed_from_u64(639 + k as u64);
        let n = doc.sentences.len();
        let report = run_qep(
            &doc,
            &model,
            |_, _| Ok(answer_for(&doc, rng.random_range(0..n), true)),
            &TemplateGenerator,
            QepOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        ensure!(report.n_questions == 2000, "k={k}: {} questions", report.n_questions);
        ensure!((report.accuracy - 1.0 / k as f64).abs() <= 0.05, "k={k}: random accuracy {}", report.accuracy);
        chance.push(format!("k={k}: {:.3}", report.accuracy));
    }
    Ok(format!(
        "real engine {:.3}, identity oracle {:.1}, random oracle {}",
        real.accuracy,
        ideal.accuracy,
        chance.join(", ")
    ))
}

fn qep_report_consistency() -> Outcome {
    let e = ReferenceEmbedder::new(5, 64);
    let mut rng = StdRng::seed_from_u64(640);
    for run in 0..50u64 {
        let spec = SyntheticSpec {
            topics: rng.random_range(2..6),
            sentences_per_topic: rng.random_range(5..30),
            seed: run,
            ..SyntheticSpec::default()
        };
        let doc = synthetic_doc(spec, &e);
        let k = rng.random_range(2..8).min(doc.sentences.len());
        let model = fit_kmeans(&vectors(&doc), k, run).map_err(|e| e.to_string())?;
        let strict = rng.random_bool(0.5);
        let n = doc.sentences.len();
        let report = run_qep(
            &doc,
            &model,
            |_, _| Ok(answer_for(&doc, rng.random_range(0..n), rng.random_bool(0.7))),
            &TemplateGenerator,
            QepOptions { count_rejected_as_incorrect: strict },
        )
        .map_err(|e| e.to_string())?;
        ensure!(report.trace() == report.n_correct, "run {run}: trace {} vs n_correct {}", report.trace(), report.n_correct);
        // Strict runs move gate-rejected questions out of the matrix.
        ensure!(
            report.confusion_total() + report.gated_out == report.n_questions,
            "run {run}: confusion {} + gated {} vs {}",
            report.confusion_total(),
            report.gated_out,
            report.n_questions
        );
        if !strict {
            ensure!(report.confusion_total() == report.n_questions, "run {run}: confusion total differs");
        }
    }
    Ok("50/50 randomized runs consistent".into())
}

fn crawler_fixture() -> Outcome {
    let other = FixtureServer::start([("/terms", Route::html(site::terms_html()))]);
    let main = FixtureServer::start(site::tos_site(&other.url("/terms")));
    let config = CrawlConfig {
        max_pages: 10,
        politeness_delay_ms: 0,
        ..CrawlConfig::new(Url::parse(&main.url("/")).unwrap())
    };
    let started = Instant::now();
    let fetcher = HttpFetcher::new(Duration::from_secs(5), true).map_err(|e| e.to_string())?;
    let out = crawl_platform("acme", &config, &fetcher).map_err(|e| e.to_string())?;
    let secs = started.elapsed().as_secs_f64();
    let md = &out.draft.merged_markdown;
    for s in TERMS_SENTENCES.iter().chain(PRIVACY_SENTENCES) {
        ensure!(md.contains(s), "missing {s:?}");
    }
    ensure!(!md.contains(CAREERS_MARKER), "careers content merged");
    ensure!(!md.contains(LOGIN_MARKER), "login page merged");
    for s in TERMS_SENTENCES {
        ensure!(md.matches(s).count() == 1, "duplicate not collapsed: {s:?}");
    }
    let dup = out.pages.iter().find(|p| p.url.path() == "/terms-duplicate").and_then(|p| p.skipped_reason);
    ensure!(dup == Some(SkipReason::Duplicate), "terms-duplicate skipped as {dup:?}");
    let log = main.requests();
    ensure!(log.len() <= config.max_pages, "{} requests for max_pages {}", log.len(), config.max_pages);
    ensure!(other.requests().is_empty(), "off-origin server was contacted");
    ensure!(secs < 5.0, "took {secs:.2}s");
    let paths: Vec<&str> = log.iter().map(LoggedRequest::path).collect();
    Ok(format!("{} requests, all same-origin: {}", log.len(), paths.join(" ")))
}

/// Digest line per stored document, identical for identical content.
fn digest(doc: &TosDocument) -> String {
    let bits: String = doc
        .sentences
        .iter()
        .flat_map(|s| s.embedding.to_f32())
        .map(|v| format!("{:08x}", v.to_bits()))
        .collect();
    let texts: String = doc.sentences.iter().map(|s| format!("{}\n", s.text)).collect();
    format!(
        "{} {} {} {} {}",
        doc.platform_id,
        ContentHash::of(&doc.merged_markdown),
        ContentHash::of(&bits),
        ContentHash::of(&texts),
        doc.sentences.len()
    )
}

fn reload_child(dir: &str) {
    let store = TosStore::open(dir).expect("store opens");
    let mut ids: Vec<String> = store.platforms().into_iter().map(|p| p.platform_id).collect();
    ids.sort();
    for id in ids {
        println!("{}", digest(&store.document(&id).expect("document reloads")));
    }
}

fn persistence_round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let e = ReferenceEmbedder::new(42, 384);
    let mut rng = StdRng::seed_from_u64(642);
    let mut docs = Vec::new();
    for (id, n) in [("alpha", 12), ("beta", 2000), ("gamma", 150)] {
        let md: String = (0..n).map(|_| random_sentence(&mut rng) + "\n\n").collect();
        let draft = DocumentDraft::new(id, format!("# https://{id}.example/terms\n\n{md}"), vec![format!("https://{id}.example/terms")]);
        docs.push(build_document(draft, &e).map_err(|e| e.to_string())?);
    }
    {
        let store = TosStore::open(dir.path()).map_err(|e| e.to_string())?;
        for d in &docs {
            store.insert_document(d.clone()).map_err(|e| e.to_string())?;
        }
    }
    let mut headers = Vec::new();
    for d in &docs {
        let path = dir.path().join("platforms").join(&d.platform_id).join("embeddings.bin");
        let raw = std::fs::read(&path).map_err(|e| e.to_string())?;
        ensure!(raw.starts_with(b"TOSE"), "{} lacks the TOSE magic", path.display());
        let (header, rows) = read_embeddings_file(&path).map_err(|e| e.to_string())?;
        ensure!(header.dim == 384 && header.count as usize == d.sentences.len(), "{}: header {header:?}", d.platform_id);
        for (row, s) in rows.iter().zip(&d.sentences) {
            ensure!(row == &s.embedding.to_f32(), "{}: stored row differs", d.platform_id);
        }
        headers.push(format!("{}x{}", header.count, header.dim));
    }
    // A separate process reopens the store.
    let out = std::process::Command::new(std::env::current_exe().map_err(|e| e.to_string())?)
        .env(RELOAD_ENV, dir.path())
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "reload process failed: {}", String::from_utf8_lossy(&out.stderr));
    let reloaded: Vec<String> = String::from_utf8_lossy(&out.stdout).lines().map(str::to_owned).collect();
    let expected: Vec<String> = docs.iter().map(digest).collect();
    ensure!(reloaded == expected, "reloaded {reloaded:?}, expected {expected:?}");
    Ok(format!("3 documents ({}) reload bit-exact in a fresh process", headers.join(", ")))
}

fn query_latency() -> Outcome {
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let cfg = common::config(&dir);
        let mut rng = StdRng::seed_from_u64(643);
        let md: String = (0..2000).map(|_| random_sentence(&mut rng) + "\n\n").collect();
        let doc = common::document(&cfg, "big", md);
        ensure!(doc.sentences.len() == 2000, "document has {} sentences", doc.sentences.len());
        let questions: Vec<String> = (0..100).map(|_| random_sentence(&mut rng).replace('.', "?")).collect();
        let svc = start(dir, cfg, move |s| s.store.insert_document(doc).unwrap()).await;
        let (mut latencies, mut round_trips) = (Vec::new(), Vec::new());
        for q in &questions {
            let sent = Instant::now();
            let (code, v) = svc.post_json("/api/query", json!({"platform_id": "big", "question": q})).await;
            round_trips.push(sent.elapsed().as_secs_f64() * 1000.0);
            ensure!(code == 200, "status {code}: {v}");
            let latency = v["metrics"]["latency_ms"].as_f64().unwrap_or(f64::NAN);
            let timing = v["metrics"]["timing_ms"].as_f64().unwrap_or(f64::NAN);
            ensure!(timing <= latency, "timing {timing} > latency {latency}");
            latencies.push(latency);
        }
        svc.shutdown().await;
        let p95 = percentile(&latencies, 95.0);
        ensure!(p95 < 100.0, "p95 latency {p95:.2} ms");
        Ok(format!(
            "p95 latency {p95:.2} ms over 100 requests on 2000 statements (client round trip p95 {:.2} ms); timing <= latency on all",
            percentile(&round_trips, 95.0)
        ))
    })
}

fn worker_state_machine() -> Outcome {
    const POLL_MS: u64 = 500;
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async {
        // The terms page answers slowly so the crawl is observable.
        let other = FixtureServer::start(Vec::<(String, Route)>::new());
        let routes: Vec<(String, Route)> = site::tos_site(&other.url("/")).into_iter().filter(|(p, _)| p != "/terms").collect();
        let slow = FixtureServer::start_with(
            routes,
            Some(Box::new(|req: &LoggedRequest| {
                (req.path() == "/terms").then(|| {
                    std::thread::sleep(Duration::from_millis(250));
                    Route::html(site::terms_html())
                })
            })),
        );
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let cfg = tosqa_service::ServiceConfig { poll_interval_ms: POLL_MS, ..common::config(&dir) };
        let svc = start(dir, cfg, |_| {}).await;

        let submitted = Instant::now();
        let (code, v) = svc.post_json("/api/crawl", json!({"url": slow.url("/")})).await;
        ensure!(code == 202, "submit returned {code}: {v}");
        let id = v["platform_id"].as_str().unwrap_or_default().to_owned();
        let mut seen = vec![v["status"].as_str().unwrap_or_default().to_owned()];
        let mut slowest_status = 0.0f64;
        let limit = Duration::from_millis(2 * POLL_MS);
        while seen.last().map(String::as_str) != Some("indexed") && submitted.elapsed() < Duration::from_secs(10) {
            let asked = Instant::now();
            let status = svc.status_of(&id).await;
            slowest_status = slowest_status.max(asked.elapsed().as_secs_f64() * 1000.0);
            if seen.last() != Some(&status) {
                seen.push(status);
            }
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
        let took = submitted.elapsed();
        ensure!(seen == ["queued", "crawling", "indexed"], "observed {seen:?}");
        ensure!(took <= limit, "indexed after {} ms, limit {} ms", took.as_millis(), limit.as_millis());

        // Induced failure: a seed nobody listens on.
        let dead = {
            let l = std::net::TcpListener::bind("127.0.0.1:0").map_err(|e| e.to_string())?;
            format!("http://localhost:{}/", l.local_addr().map_err(|e| e.to_string())?.port())
        };
        let (_, v) = svc.post_json("/api/crawl", json!({"url": dead})).await;
        let failed_id = v["platform_id"].as_str().unwrap_or_default().to_owned();
        let started = Instant::now();
        let mut status = String::new();
        while status != "failed" && started.elapsed() < Duration::from_secs(10) {
            let asked = Instant::now();
            status = svc.status_of(&failed_id).await;
            slowest_status = slowest_status.max(asked.elapsed().as_secs_f64() * 1000.0);
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
        ensure!(status == "failed", "dead seed ended as {status:?}");
        let (_, v) = svc.get_json(&format!("/api/platforms/{failed_id}")).await;
        let reason = v["failure_reason"].as_str().unwrap_or_default().to_owned();
        ensure!(!reason.is_empty(), "no failure reason recorded");
        // The loop is alive: the good platform still answers and a fresh
        // status request is fast.
        let asked = Instant::now();
        ensure!(svc.status_of(&id).await == "indexed", "indexed platform changed state");
        slowest_status = slowest_status.max(asked.elapsed().as_secs_f64() * 1000.0);
        let (code, _) = svc.post_json("/api/query", json!({"platform_id": id, "question": TERMS_SENTENCES[3]})).await;
        ensure!(code == 200, "query after failure returned {code}");
        ensure!(svc.state.store.pending().is_empty(), "queue not drained");
        ensure!(slowest_status < 100.0, "slowest status request {slowest_status:.1} ms");
        svc.shutdown().await;
        Ok(format!(
            "queued -> crawling -> indexed in {} ms (limit {} ms); dead seed -> failed ({reason}); slowest status request {slowest_status:.1} ms",
            took.as_millis(),
            limit.as_millis()
        ))
    })
}
