use super::{check_corpus, ngram_overlap, MetricError, ScoredPair};

/// Corpus-level clipped n-gram matches and hypothesis n-gram total.
pub fn modified_precision(corpus: &[ScoredPair], n: usize) -> (usize, usize) {
    corpus.iter().fold((0, 0), |(m, t), p| {
        let (overlap, hyp_total, _) = ngram_overlap(&p.hypothesis, &p.reference, n);
        (m + overlap, t + hyp_total)
    })
}

/// Corpus BLEU with uniform weights over n = 1..=max_n.
///
/// For n ≥ 2 a zero match count is smoothed to 1/(total + 1); unigram
/// precision is never smoothed, so a corpus with no shared token scores 0.
pub fn bleu(corpus: &[ScoredPair], max_n: usize) -> Result<f64, MetricError> {
    check_corpus(corpus)?;
    let max_n = max_n.max(1);
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let (matches, total) = modified_precision(corpus, n);
        let p = if matches > 0 {
            matches as f64 / total as f64
        } else if n == 1 {
            return Ok(0.0);
        } else {
            1.0 / (total as f64 + 1.0)
        };
        log_sum += p.ln();
    }
    let c: usize = corpus.iter().map(|p| p.hypothesis.len()).sum();
    let r: usize = corpus.iter().map(|p| p.reference.len()).sum();
    let bp = if c >= r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    Ok((bp * (log_sum / max_n as f64).exp()).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cat_on_the_mat() {
        // unigrams 5/6, bigrams 3/5, trigrams 1/4, 4-grams 0/3 -> 1/4 smoothed
        let corpus = vec![ScoredPair::from_text("the cat sat on the mat", "the cat is on the mat")];
        let expected = ((5.0f64 / 6.0).ln() + (3.0f64 / 5.0).ln() + (1.0f64 / 4.0).ln() + (1.0f64 / 4.0).ln()) / 4.0;
        assert!((bleu(&corpus, 4).unwrap() - expected.exp()).abs() < 1e-12);
    }

    #[test]
    fn brevity_penalty_applies_to_short_output() {
        let corpus = vec![ScoredPair::from_text("the cat", "the cat sat down")];
        let b1 = bleu(&corpus, 1).unwrap();
        assert!((b1 - (1.0f64 - 2.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn reordering_does_not_change_the_score() {
        let a = ScoredPair::from_text("a b c d", "a b d c");
        let b = ScoredPair::from_text("x y", "x z y");
        let s1 = bleu(&[a.clone(), b.clone()], 4).unwrap();
        let s2 = bleu(&[b, a], 4).unwrap();
        assert_eq!(s1, s2);
    }
}
