use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{check_corpus, f1, ngram_overlap, MetricError, ScoredPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RougeVariant {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "L")]
    L,
}

impl fmt::Display for RougeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RougeVariant::One => "rouge1",
            RougeVariant::Two => "rouge2",
            RougeVariant::L => "rougeL",
        })
    }
}

impl FromStr for RougeVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim_start_matches("rouge").to_ascii_uppercase().as_str() {
            "1" => Ok(RougeVariant::One),
            "2" => Ok(RougeVariant::Two),
            "L" => Ok(RougeVariant::L),
            other => Err(format!("unknown ROUGE variant `{other}`")),
        }
    }
}

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { above.max(row[j]) };
            diag = above;
        }
    }
    row[b.len()]
}

/// F1 (β = 1) for one pair. When neither side has any n-gram of the
/// requested order, the pair scores 1 if the token lists are equal, else 0.
pub fn rouge_pair(pair: &ScoredPair, variant: RougeVariant) -> f64 {
    let (hit, h_total, r_total) = match variant {
        RougeVariant::One => ngram_overlap(&pair.hypothesis, &pair.reference, 1),
        RougeVariant::Two => ngram_overlap(&pair.hypothesis, &pair.reference, 2),
        RougeVariant::L => (
            lcs_len(&pair.hypothesis, &pair.reference),
            pair.hypothesis.len(),
            pair.reference.len(),
        ),
    };
    if h_total == 0 && r_total == 0 {
        return f64::from(pair.hypothesis == pair.reference);
    }
    if hit == 0 {
        return 0.0;
    }
    f1(hit as f64 / h_total as f64, hit as f64 / r_total as f64)
}

/// Corpus mean of per-pair F1.
pub fn rouge(corpus: &[ScoredPair], variant: RougeVariant) -> Result<f64, MetricError> {
    check_corpus(corpus)?;
    Ok(corpus.iter().map(|p| rouge_pair(p, variant)).sum::<f64>() / corpus.len() as f64)
}
