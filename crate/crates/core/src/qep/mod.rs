//! Annotation-free answer evaluation.
//!
//! A k-means model fit on statement embeddings of a reference corpus acts as
//! a topic oracle. For every statement of a document a question is
//! generated, answered against the same document, and the answer counts as
//! correct when it falls in the same cluster as the source statement.

mod kmeans;
mod question;
pub mod synthetic;
pub mod tables;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::document::{Sentence, TosDocument};
use crate::qa::{Answer, QaError};
use crate::remote::RemoteError;
use crate::text::content_tokens;

pub use kmeans::{assign_cluster, fit_kmeans, fit_kmeans_points, squared_distance, ClusterModel, MAX_ITERATIONS, N_INIT, TOLERANCE};
pub use question::{
    generate_question, template_question, ExternalGenerator, GeneratedQuestion, GeneratorKind, QuestionGenerator,
    TemplateGenerator,
};

pub const TOP_TERMS: usize = 10;

/// Cluster counts swept by the evaluation tables.
pub const TABLE_K_SWEEP: &[usize] = &[5, 10, 15, 20, 30, 50, 80];

#[derive(Debug, thiserror::Error)]
pub enum QepError {
    #[error("need at least {k} points, got {points}")]
    TooFewPoints { points: usize, k: usize },
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("points must be finite")]
    NonFinite,
    #[error("statement has {tokens} word tokens, need at least 4")]
    StatementTooShort { tokens: usize },
    #[error("generator returned an empty question")]
    EmptyQuestion,
    #[error("cluster {0} has no topic label")]
    UnlabeledCluster(usize),
    #[error("document has no statements")]
    EmptyDocument,
    #[error("answer refers to sentence {0}, which is not in the document")]
    UnknownSentence(usize),
    #[error("question generator unavailable: {0}")]
    BackendUnavailable(#[from] RemoteError),
    #[error(transparent)]
    Qa(#[from] QaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QepOptions {
    /// Count answers rejected by the relevance gate as incorrect instead of
    /// scoring the retrieved statement.
    pub count_rejected_as_incorrect: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QepReport {
    pub platform_id: String,
    pub k: usize,
    pub n_questions: usize,
    pub n_correct: usize,
    pub accuracy: f64,
    /// Rows are the source statement's cluster, columns the answer's.
    pub confusion: Vec<Vec<usize>>,
    pub per_cluster_counts: Vec<usize>,
    /// Answers the relevance gate rejected (scored anyway unless the strict
    /// option is set).
    pub n_rejected: usize,
    /// Questions counted as incorrect without a confusion cell because the
    /// strict option was set and the gate rejected them.
    pub gated_out: usize,
    /// Statements skipped because no question could be generated.
    pub n_skipped: usize,
}

impl QepReport {
    pub fn trace(&self) -> usize {
        (0..self.k).map(|i| self.confusion[i][i]).sum()
    }

    pub fn confusion_total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    /// Internal consistency: trace equals correct count, confusion plus
    /// gated-out questions equals question count.
    pub fn is_consistent(&self) -> bool {
        self.trace() == self.n_correct
            && self.confusion_total() + self.gated_out == self.n_questions
            && (0.0..=1.0).contains(&self.accuracy)
            && self.per_cluster_counts.iter().sum::<usize>() == self.n_questions
    }
}

/// Evaluates `doc` against `model`. `answer` receives the source statement
/// id and the generated question and returns the system's answer.
pub fn run_qep<F>(
    doc: &TosDocument,
    model: &ClusterModel,
    mut answer: F,
    generator: &dyn QuestionGenerator,
    options: QepOptions,
) -> Result<QepReport, QepError>
where
    F: FnMut(usize, &str) -> Result<Answer, QaError>,
{
    if doc.dim() != model.dim {
        return Err(QepError::DimensionMismatch { expected: model.dim, found: doc.dim() });
    }
    let k = model.k;
    let mut confusion = vec![vec![0usize; k]; k];
    let mut per_cluster_counts = vec![0usize; k];
    let (mut n_questions, mut n_correct, mut n_rejected, mut gated_out, mut n_skipped) = (0, 0, 0, 0, 0);

    let statement_clusters: Vec<usize> =
        doc.sentences.iter().map(|s| model.assign(&s.embedding)).collect::<Result<_, _>>()?;

    for sentence in &doc.sentences {
        let question = match generate_question(sentence.sentence_id, &sentence.text, generator) {
            Ok(q) => q,
            Err(QepError::StatementTooShort { .. }) => {
                n_skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let answer = answer(sentence.sentence_id, &question.question_text)?;
        let source_cluster = statement_clusters[sentence.sentence_id];
        let answer_cluster =
            *statement_clusters.get(answer.sentence_id).ok_or(QepError::UnknownSentence(answer.sentence_id))?;

        n_questions += 1;
        per_cluster_counts[source_cluster] += 1;
        if !answer.accepted {
            n_rejected += 1;
            if options.count_rejected_as_incorrect {
                gated_out += 1;
                continue;
            }
        }
        confusion[source_cluster][answer_cluster] += 1;
        if source_cluster == answer_cluster {
            n_correct += 1;
        }
    }

    let accuracy = if n_questions == 0 { 0.0 } else { n_correct as f64 / n_questions as f64 };
    let report = QepReport {
        platform_id: doc.platform_id.clone(),
        k,
        n_questions,
        n_correct,
        accuracy,
        confusion,
        per_cluster_counts,
        n_rejected,
        gated_out,
        n_skipped,
    };
    debug_assert!(report.is_consistent());
    Ok(report)
}

/// The answer an ideal system would give: the source statement itself.
/// Used as the identity oracle for [`run_qep`].
pub fn identity_answer(doc: &TosDocument, statement_id: usize) -> Result<Answer, QaError> {
    let s = doc.sentence(statement_id).ok_or(QaError::EmptyIndex)?;
    Ok(Answer {
        sentence_id: s.sentence_id,
        text: s.text.clone(),
        similarity: 1.0,
        relevance: 1.0,
        accepted: true,
        fallback_message: None,
    })
}

/// Ten most frequent content tokens per cluster, ties lexicographic. Every
/// cluster id appears; empty clusters map to an empty list.
pub fn cluster_top_terms(model: &ClusterModel, sentences: &[Sentence]) -> Result<BTreeMap<usize, Vec<String>>, QepError> {
    let mut counts: Vec<HashMap<String, usize>> = vec![HashMap::new(); model.k];
    for s in sentences {
        let c = model.assign(&s.embedding)?;
        for t in content_tokens(&s.text) {
            *counts[c].entry(t).or_insert(0) += 1;
        }
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(c, terms)| {
            let mut ranked: Vec<(String, usize)> = terms.into_iter().collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            (c, ranked.into_iter().take(TOP_TERMS).map(|(t, _)| t).collect())
        })
        .collect())
}

/// Human-assigned topic names plus the term summaries they were based on.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TopicLabeling {
    pub labels: BTreeMap<usize, String>,
    pub top_terms: BTreeMap<usize, Vec<String>>,
}

impl TopicLabeling {
    /// A labeling skeleton with no names yet.
    pub fn from_top_terms(top_terms: BTreeMap<usize, Vec<String>>) -> Self {
        Self { labels: BTreeMap::new(), top_terms }
    }
}

/// Share of the document's statements per labeled topic.
pub fn topic_distribution(
    doc: &TosDocument,
    model: &ClusterModel,
    labeling: &TopicLabeling,
) -> Result<BTreeMap<String, f64>, QepError> {
    if let Some(missing) = (0..model.k).find(|c| !labeling.labels.contains_key(c)) {
        return Err(QepError::UnlabeledCluster(missing));
    }
    if doc.sentences.is_empty() {
        return Err(QepError::EmptyDocument);
    }
    let mut counts = vec![0usize; model.k];
    for s in &doc.sentences {
        counts[model.assign(&s.embedding)?] += 1;
    }
    let total = doc.sentences.len() as f64;
    let mut out: BTreeMap<String, f64> = labeling.labels.values().map(|l| (l.clone(), 0.0)).collect();
    for (c, n) in counts.into_iter().enumerate() {
        *out.get_mut(&labeling.labels[&c]).expect("label present") += n as f64 / total;
    }
    Ok(out)
}
