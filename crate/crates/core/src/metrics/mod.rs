//! Text-generation metrics (BLEU, METEOR, ROUGE) and NLU scoring.
//!
//! All text metrics work on token lists produced by [`crate::text::tokenize`].

mod bleu;
mod meteor;
mod nlu;
mod rouge;

pub use bleu::{bleu, modified_precision};
pub use meteor::{meteor, meteor_corpus, meteor_with, Alignment, MeteorConfig};
pub use nlu::{average_accuracy, score_nlu, NluExample, NluScores, TagScore};
pub use rouge::{lcs_len, rouge, rouge_pair, RougeVariant};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::tokenize;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("pair {0} has an empty reference")]
    EmptyReference(usize),
    #[error("{what}: expected {expected}, got {got}")]
    Shape { what: String, expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub hypothesis: Vec<String>,
    pub reference: Vec<String>,
}

impl ScoredPair {
    pub fn new(hypothesis: Vec<String>, reference: Vec<String>) -> Self {
        ScoredPair { hypothesis, reference }
    }

    /// Tokenizes both sides with the shared tokenizer.
    pub fn from_text(hypothesis: &str, reference: &str) -> Self {
        ScoredPair::new(tokenize(hypothesis), tokenize(reference))
    }
}

/// Pairs hypothesis and reference lines; counts must match.
pub fn pairs_from_lines(hypotheses: &str, references: &str) -> Result<Vec<ScoredPair>, MetricError> {
    let h: Vec<&str> = hypotheses.lines().collect();
    let r: Vec<&str> = references.lines().collect();
    if h.len() != r.len() {
        return Err(MetricError::Shape {
            what: "hypothesis lines vs reference lines".into(),
            expected: r.len(),
            got: h.len(),
        });
    }
    Ok(h.iter().zip(&r).map(|(h, r)| ScoredPair::from_text(h, r)).collect())
}

pub(crate) fn check_corpus(corpus: &[ScoredPair]) -> Result<(), MetricError> {
    if corpus.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    if let Some(i) = corpus.iter().position(|p| p.reference.is_empty()) {
        return Err(MetricError::EmptyReference(i));
    }
    Ok(())
}

pub(crate) fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped overlap: Σ min(count_hyp, count_ref) over n-grams.
pub(crate) fn ngram_overlap(hyp: &[String], reference: &[String], n: usize) -> (usize, usize, usize) {
    let h = ngram_counts(hyp, n);
    let r = ngram_counts(reference, n);
    let overlap = h.iter().map(|(g, c)| (*c).min(r.get(g).copied().unwrap_or(0))).sum();
    (overlap, hyp.len().saturating_sub(n - 1), reference.len().saturating_sub(n - 1))
}

pub(crate) fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// The five generation scores reported together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlgScores {
    pub bleu: f64,
    pub meteor: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
}

impl NlgScores {
    pub fn mean(&self) -> f64 {
        (self.bleu + self.meteor + self.rouge1 + self.rouge2 + self.rouge_l) / 5.0
    }
}

pub fn score_nlg(corpus: &[ScoredPair]) -> Result<NlgScores, MetricError> {
    Ok(NlgScores {
        bleu: bleu(corpus, 4)?,
        meteor: meteor_corpus(corpus)?,
        rouge1: rouge(corpus, RougeVariant::One)?,
        rouge2: rouge(corpus, RougeVariant::Two)?,
        rouge_l: rouge(corpus, RougeVariant::L)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_disjoint_corpora() {
        let same = vec![
            ScoredPair::from_text("the cat sat on the mat", "the cat sat on the mat"),
            ScoredPair::from_text("hello there", "hello there"),
        ];
        let s = score_nlg(&same).unwrap();
        assert_eq!((s.bleu, s.rouge1, s.rouge2, s.rouge_l), (1.0, 1.0, 1.0, 1.0));
        let apart = vec![ScoredPair::from_text("a b c", "x y z")];
        let s = score_nlg(&apart).unwrap();
        assert_eq!(s.mean(), 0.0);
    }

    #[test]
    fn line_pairing_checks_counts() {
        assert_eq!(pairs_from_lines("a\nb", "a\nb").unwrap().len(), 2);
        assert!(pairs_from_lines("a", "a\nb").is_err());
    }

    #[test]
    fn empty_reference_is_rejected() {
        let corpus = vec![ScoredPair::from_text("a", "")];
        assert_eq!(bleu(&corpus, 4), Err(MetricError::EmptyReference(0)));
        assert_eq!(bleu(&[], 4), Err(MetricError::EmptyCorpus));
    }
}
