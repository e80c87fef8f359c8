use std::sync::Arc;

use serde_json::{json, Value};
use tosqa_core::embedding::{backend_from_spec, ExternalEmbedder};
use tosqa_core::index::build_document;
use tosqa_core::qa::{ExternalScorer, QaConfig};
use tosqa_core::qep::{generate_question, ExternalGenerator, GeneratorKind, QepError};
use tosqa_core::{DocumentDraft, Embedder, EmbeddingBackendSpec, EmbeddingError, QaEngine, QaError};
use tosqa_testkit::{FixtureServer, LoggedRequest, Route};

/// Toy remote models. The encoder maps a text to (letters, vowels, 1) so
/// results are easy to predict.
fn models() -> FixtureServer {
    FixtureServer::start_with(
        [("/down", Route::status(503))],
        Some(Box::new(|req: &LoggedRequest| {
            let body: Value = serde_json::from_str(&req.body).ok()?;
            let route = match req.path() {
                "/embed" | "/embed-wrong-dim" => {
                    let vectors: Vec<Value> = body["texts"]
                        .as_array()?
                        .iter()
                        .map(|t| {
                            let t = t.as_str().unwrap_or("");
                            let letters = t.chars().filter(|c| c.is_alphabetic()).count() as f64;
                            let vowels = t.chars().filter(|c| "aeiou".contains(*c)).count() as f64;
                            json!([letters, vowels, 1.0])
                        })
                        .collect();
                    let dim = if req.path() == "/embed" { 3 } else { 4 };
                    json!({"vectors": vectors, "dim": dim})
                }
                "/nli" => {
                    // Scores high only when the premise is a statement and the
                    // hypothesis is the question.
                    let ok = body["hypothesis"].as_str()?.ends_with('?') && !body["premise"].as_str()?.ends_with('?');
                    json!({"score": if ok { 0.9 } else { 0.1 }})
                }
                "/questions" => {
                    let qs: Vec<String> = body["statements"]
                        .as_array()?
                        .iter()
                        .map(|s| format!("What is said about {}", s.as_str().unwrap_or("").split(' ').next().unwrap_or("")))
                        .collect();
                    json!({"questions": qs})
                }
                _ => return None,
            };
            Some(Route::json(route.to_string()))
        })),
    )
}

#[test]
fn external_embedder_round_trip() {
    let server = models();
    let spec = EmbeddingBackendSpec::external(server.url("/embed"), 3);
    let e = ExternalEmbedder::new(spec).unwrap();
    let v = e.embed("abc").unwrap();
    let norm = (9.0f64 + 1.0 + 1.0).sqrt();
    let expected = [3.0 / norm, 1.0 / norm, 1.0 / norm];
    for (a, b) in v.values().iter().zip(expected) {
        assert!((a - b).abs() < 1e-12);
    }
    let req = &server.requests()[0];
    assert_eq!(req.method, "POST");
    assert_eq!(serde_json::from_str::<Value>(&req.body).unwrap(), json!({"texts": ["abc"]}));
    assert_eq!(req.header("user-agent"), Some(tosqa_core::USER_AGENT));
}

#[test]
fn external_embedder_rejects_wrong_dim_and_outages() {
    let server = models();
    let e = backend_from_spec(&EmbeddingBackendSpec::external(server.url("/embed-wrong-dim"), 3)).unwrap();
    assert!(matches!(e.embed("abc"), Err(EmbeddingError::BackendUnavailable(_))));
    let e = backend_from_spec(&EmbeddingBackendSpec::external(server.url("/down"), 3)).unwrap();
    assert!(matches!(e.embed("abc"), Err(EmbeddingError::BackendUnavailable(_))));
}

#[test]
fn external_scorer_gets_candidate_as_premise() {
    let server = models();
    let embedder: Arc<dyn Embedder> = Arc::new(tosqa_core::embedding::ReferenceEmbedder::new(1, 32));
    let doc = build_document(
        DocumentDraft::new("p", "We share data with advertising partners.\n\nYou may cancel at any time.\n", vec![]),
        embedder.as_ref(),
    )
    .unwrap();
    let engine = QaEngine::new(embedder, Arc::new(ExternalScorer::new(server.url("/nli"))), QaConfig::default());
    let a = engine.answer("Do you share data with partners?", &doc).unwrap();
    assert_eq!(a.relevance, 0.9);
    assert!(a.accepted);
    let body: Value = serde_json::from_str(&server.requests()[0].body).unwrap();
    assert_eq!(body["premise"], json!(a.text));
    assert_eq!(body["hypothesis"], json!("Do you share data with partners?"));
}

#[test]
fn external_scorer_outage_is_backend_unavailable() {
    let server = models();
    let embedder: Arc<dyn Embedder> = Arc::new(tosqa_core::embedding::ReferenceEmbedder::new(1, 32));
    let doc = build_document(DocumentDraft::new("p", "We share data with advertising partners.\n", vec![]), embedder.as_ref()).unwrap();
    let engine = QaEngine::new(embedder, Arc::new(ExternalScorer::new(server.url("/down"))), QaConfig::default());
    assert!(matches!(engine.answer("Do you share data?", &doc), Err(QaError::BackendUnavailable(_))));
}

#[test]
fn external_generator_normalizes_questions() {
    let server = models();
    let g = ExternalGenerator::new(server.url("/questions"));
    let q = generate_question(3, "Cookies remember your preferences between visits.", &g).unwrap();
    assert_eq!(q.statement_id, 3);
    assert_eq!(q.question_text, "What is said about Cookies?");
    assert_eq!(q.generator, GeneratorKind::External);
    assert!(matches!(generate_question(0, "Too short.", &g), Err(QepError::StatementTooShort { .. })));
    let down = ExternalGenerator::new(server.url("/down"));
    assert!(matches!(
        generate_question(0, "Cookies remember your preferences between visits.", &down),
        Err(QepError::BackendUnavailable(_))
    ));
}
