use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::QepError;
use crate::remote::{JsonClient, RemoteError};
use crate::segment::MIN_SEGMENT_TOKENS;
use crate::text::{content_tokens, tokenize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    #[default]
    TemplateReference,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedQuestion {
    pub statement_id: usize,
    pub question_text: String,
    pub generator: GeneratorKind,
}

pub trait QuestionGenerator: Send + Sync {
    fn kind(&self) -> GeneratorKind;

    /// One question per statement, in order.
    fn generate_batch(&self, statements: &[&str]) -> Result<Vec<String>, QepError>;
}

/// Picks the two most frequent content tokens (ties by first occurrence)
/// and asks "What does the service state about <a> and <b>?".
#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateGenerator;

fn check_length(statement: &str) -> Result<(), QepError> {
    let n = tokenize(statement).len();
    if n < MIN_SEGMENT_TOKENS {
        return Err(QepError::StatementTooShort { tokens: n });
    }
    Ok(())
}

fn top_terms(tokens: Vec<String>, n: usize) -> Vec<String> {
    let mut stats: HashMap<String, (usize, usize)> = HashMap::new();
    for (pos, t) in tokens.into_iter().enumerate() {
        stats.entry(t).or_insert((0, pos)).0 += 1;
    }
    let mut ranked: Vec<(String, (usize, usize))> = stats.into_iter().collect();
    ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
    ranked.into_iter().take(n).map(|(t, _)| t).collect()
}

pub fn template_question(statement: &str) -> Result<String, QepError> {
    check_length(statement)?;
    let mut terms = top_terms(content_tokens(statement), 2);
    if terms.is_empty() {
        // Only stopwords: fall back to the raw tokens.
        terms = top_terms(tokenize(statement), 2);
    }
    Ok(match terms.as_slice() {
        [a] => format!("What does the service state about {a}?"),
        [a, b, ..] => format!("What does the service state about {a} and {b}?"),
        [] => unreachable!("statement has at least four tokens"),
    })
}

impl QuestionGenerator for TemplateGenerator {
    fn kind(&self) -> GeneratorKind {
        GeneratorKind::TemplateReference
    }

    fn generate_batch(&self, statements: &[&str]) -> Result<Vec<String>, QepError> {
        statements.iter().map(|s| template_question(s)).collect()
    }
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    statements: &'a [&'a str],
}

#[derive(Deserialize)]
struct GenerateResponse {
    questions: Vec<String>,
}

/// Remote text-to-text generator: `{"statements": [...]}` -> `{"questions": [...]}`.
#[derive(Debug)]
pub struct ExternalGenerator {
    endpoint: String,
    client: JsonClient,
}

impl ExternalGenerator {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self { endpoint: endpoint.into(), client: JsonClient::default() }
    }
}

impl QuestionGenerator for ExternalGenerator {
    fn kind(&self) -> GeneratorKind {
        GeneratorKind::External
    }

    fn generate_batch(&self, statements: &[&str]) -> Result<Vec<String>, QepError> {
        for s in statements {
            check_length(s)?;
        }
        let resp: GenerateResponse = self.client.post(&self.endpoint, &GenerateRequest { statements })?;
        if resp.questions.len() != statements.len() {
            return Err(RemoteError::BadResponse {
                endpoint: self.endpoint.clone(),
                reason: format!("expected {} questions, got {}", statements.len(), resp.questions.len()),
            }
            .into());
        }
        Ok(resp
            .questions
            .into_iter()
            .map(|q| {
                let q = q.trim().to_owned();
                if q.ends_with('?') {
                    q
                } else {
                    format!("{q}?")
                }
            })
            .collect())
    }
}

pub fn generate_question(statement_id: usize, statement: &str, generator: &dyn QuestionGenerator) -> Result<GeneratedQuestion, QepError> {
    let mut out = generator.generate_batch(&[statement])?;
    let question_text = out.pop().filter(|q| !q.trim().is_empty()).ok_or(QepError::EmptyQuestion)?;
    Ok(GeneratedQuestion { statement_id, question_text, generator: generator.kind() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_rule_on_frozen_statement() {
        // Content tokens: share, personal, data, advertising, partners, all
        // once, so document order decides.
        let q = template_question("We may share your personal data with advertising partners.").unwrap();
        assert_eq!(q, "What does the service state about share and personal?");
    }

    #[test]
    fn frequency_beats_order() {
        let q = template_question("Cookies help us; cookies and analytics cookies track analytics usage.").unwrap();
        assert_eq!(q, "What does the service state about cookies and analytics?");
    }

    #[test]
    fn short_statement_is_rejected() {
        assert!(matches!(template_question("Terms apply here."), Err(QepError::StatementTooShort { tokens: 3 })));
    }

    #[test]
    fn stopword_only_and_single_term_statements() {
        assert_eq!(template_question("We will do it").unwrap(), "What does the service state about we and will?");
        assert_eq!(template_question("You may not use it").unwrap(), "What does the service state about use?");
    }

    #[test]
    fn deterministic_and_question_shaped() {
        let s = "Arbitration is required for all disputes with the company.";
        let a = generate_question(3, s, &TemplateGenerator).unwrap();
        let b = generate_question(3, s, &TemplateGenerator).unwrap();
        assert_eq!(a, b);
        assert!(a.question_text.ends_with('?'));
        assert_eq!(a.generator, GeneratorKind::TemplateReference);
    }
}
