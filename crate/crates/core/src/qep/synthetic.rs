//! Planted-topic corpora: each topic owns a disjoint vocabulary of
//! pseudo-words and every sentence draws its tokens from one topic.

use std::collections::HashSet;

use crate::rng::SplitMix64;
use crate::text::is_stopword;

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub topics: usize,
    pub vocabulary_per_topic: usize,
    pub sentences_per_topic: usize,
    pub tokens_per_sentence: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self { topics: 4, vocabulary_per_topic: 30, sentences_per_topic: 50, tokens_per_sentence: 10, seed: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub vocabularies: Vec<Vec<String>>,
    pub sentences: Vec<String>,
    /// Planted topic of each sentence.
    pub labels: Vec<usize>,
}

impl SyntheticCorpus {
    /// One sentence per line, separated by blank lines.
    pub fn markdown(&self) -> String {
        self.sentences.join("\n\n") + "\n"
    }
}

fn pseudo_word(rng: &mut SplitMix64) -> String {
    let syllables = 3 + rng.next_below(2) as usize;
    let mut w = String::new();
    for _ in 0..syllables {
        w.push(CONSONANTS[rng.next_below(CONSONANTS.len() as u64) as usize] as char);
        w.push(VOWELS[rng.next_below(VOWELS.len() as u64) as usize] as char);
    }
    w
}

pub fn planted_topics(spec: SyntheticSpec) -> SyntheticCorpus {
    assert!(spec.tokens_per_sentence >= 4 && spec.tokens_per_sentence <= spec.vocabulary_per_topic);
    let mut rng = SplitMix64::new(spec.seed);
    let mut used = HashSet::new();
    let vocabularies: Vec<Vec<String>> = (0..spec.topics)
        .map(|_| {
            let mut vocab = Vec::with_capacity(spec.vocabulary_per_topic);
            while vocab.len() < spec.vocabulary_per_topic {
                let w = pseudo_word(&mut rng);
                if !is_stopword(&w) && used.insert(w.clone()) {
                    vocab.push(w);
                }
            }
            vocab
        })
        .collect();

    let mut sentences = Vec::new();
    let mut labels = Vec::new();
    let mut seen = HashSet::new();
    for _ in 0..spec.sentences_per_topic {
        for (topic, vocab) in vocabularies.iter().enumerate() {
            // Distinct token sets, so every sentence has a unique embedding.
            loop {
                let mut idx: Vec<usize> = (0..vocab.len()).collect();
                for i in 0..spec.tokens_per_sentence {
                    let j = i + rng.next_below((idx.len() - i) as u64) as usize;
                    idx.swap(i, j);
                }
                let mut key: Vec<usize> = idx[..spec.tokens_per_sentence].to_vec();
                let words: Vec<&str> = key.iter().map(|&i| vocab[i].as_str()).collect();
                key.sort_unstable();
                if seen.insert((topic, key)) {
                    let mut s = words.join(" ");
                    s[..1].make_ascii_uppercase();
                    s.push('.');
                    sentences.push(s);
                    labels.push(topic);
                    break;
                }
            }
        }
    }
    SyntheticCorpus { vocabularies, sentences, labels }
}
