use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{f1, MetricError};

/// One utterance's intent and tag sequences, predicted or gold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NluExample {
    pub intent: String,
    pub inform_tags: Vec<String>,
    pub request_tags: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NluScores {
    /// α: exact intent accuracy.
    pub intent_accuracy: f64,
    /// β: support-weighted F1 over inform tags.
    pub inform_slot_f1: f64,
    /// γ: support-weighted F1 over request tags.
    pub request_slot_f1: f64,
    /// Keys are `inform:<TAG>` or `request:<TAG>` for every non-O tag seen in gold.
    pub per_tag: BTreeMap<String, TagScore>,
}

impl NluScores {
    pub fn average_accuracy(&self) -> f64 {
        average_accuracy(self.intent_accuracy, self.inform_slot_f1, self.request_slot_f1)
    }
}

/// Mean of intent accuracy and the two slot scores.
pub fn average_accuracy(alpha: f64, beta: f64, gamma: f64) -> f64 {
    (alpha + beta + gamma) / 3.0
}

fn channel_scores<'a, F>(
    predictions: &'a [NluExample],
    gold: &'a [NluExample],
    tags_of: F,
) -> (BTreeMap<String, TagScore>, f64)
where
    F: Fn(&'a NluExample) -> &'a [String],
{
    let gold_tags: BTreeSet<&String> = gold.iter().flat_map(&tags_of).filter(|t| *t != "O").collect();
    let mut scores = BTreeMap::new();
    for tag in &gold_tags {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (p, g) in predictions.iter().zip(gold) {
            for (pt, gt) in tags_of(p).iter().zip(tags_of(g)) {
                match (pt == *tag, gt == *tag) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    _ => {}
                }
            }
        }
        let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        scores.insert(
            (*tag).clone(),
            TagScore {
                precision,
                recall,
                f1: f1(precision, recall),
                support: tp + fn_,
            },
        );
    }
    let total: usize = scores.values().map(|s| s.support).sum();
    let weighted = if total == 0 {
        let predicted_any = predictions.iter().flat_map(tags_of).any(|t| t != "O");
        f64::from(!predicted_any)
    } else {
        scores.values().map(|s| s.f1 * s.support as f64).sum::<f64>() / total as f64
    };
    (scores, weighted)
}

/// Token-level scoring of predicted intents and BIO tags against gold.
pub fn score_nlu(predictions: &[NluExample], gold: &[NluExample]) -> Result<NluScores, MetricError> {
    if predictions.len() != gold.len() {
        return Err(MetricError::Shape {
            what: "prediction count".into(),
            expected: gold.len(),
            got: predictions.len(),
        });
    }
    if gold.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    for (i, (p, g)) in predictions.iter().zip(gold).enumerate() {
        for (what, pl, gl) in [
            ("inform tags", p.inform_tags.len(), g.inform_tags.len()),
            ("request tags", p.request_tags.len(), g.request_tags.len()),
            ("gold tag channels", g.request_tags.len(), g.inform_tags.len()),
        ] {
            if pl != gl {
                return Err(MetricError::Shape {
                    what: format!("utterance {i} {what}"),
                    expected: gl,
                    got: pl,
                });
            }
        }
    }
    let correct = predictions.iter().zip(gold).filter(|(p, g)| p.intent == g.intent).count();
    let (inform, beta) = channel_scores(predictions, gold, |e| &e.inform_tags);
    let (request, gamma) = channel_scores(predictions, gold, |e| &e.request_tags);
    let mut per_tag = BTreeMap::new();
    per_tag.extend(inform.into_iter().map(|(k, v)| (format!("inform:{k}"), v)));
    per_tag.extend(request.into_iter().map(|(k, v)| (format!("request:{k}"), v)));
    Ok(NluScores {
        intent_accuracy: correct as f64 / gold.len() as f64,
        inform_slot_f1: beta,
        request_slot_f1: gamma,
        per_tag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(intent: &str, inform: &[&str], request: &[&str]) -> NluExample {
        NluExample {
            intent: intent.into(),
            inform_tags: inform.iter().map(|s| s.to_string()).collect(),
            request_tags: request.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn perfect_predictions() {
        let gold = vec![ex("inform", &["O", "B-AREA"], &["O", "O"]), ex("request", &["O"], &["B-PHONE"])];
        let s = score_nlu(&gold, &gold).unwrap();
        assert_eq!((s.intent_accuracy, s.inform_slot_f1, s.request_slot_f1), (1.0, 1.0, 1.0));
        assert_eq!(s.average_accuracy(), 1.0);
    }

    #[test]
    fn all_o_predictions_have_zero_recall() {
        let gold = vec![ex("inform", &["B-AREA", "O"], &["O", "O"])];
        let pred = vec![ex("inform", &["O", "O"], &["O", "O"])];
        let s = score_nlu(&pred, &gold).unwrap();
        assert_eq!(s.per_tag["inform:B-AREA"].recall, 0.0);
        assert_eq!(s.per_tag["inform:B-AREA"].f1, 0.0);
        assert_eq!(s.request_slot_f1, 1.0);
    }

    #[test]
    fn average_accuracy_arithmetic() {
        assert!((average_accuracy(0.9, 0.6, 0.6) - 0.7).abs() < 1e-12);
        assert_eq!(average_accuracy(0.2, 0.5, 0.8), average_accuracy(0.8, 0.2, 0.5));
    }

    #[test]
    fn shape_mismatch() {
        let gold = vec![ex("inform", &["O"], &["O"])];
        assert!(score_nlu(&[], &gold).is_err());
        let bad = vec![ex("inform", &["O", "O"], &["O"])];
        assert!(score_nlu(&bad, &gold).is_err());
    }
}
