use serde::{Deserialize, Serialize};

use super::{check_corpus, MetricError, ScoredPair};

/// Weighting of the harmonic mean and the fragmentation penalty.
///
/// `Fmean = P·R / (alpha·R + (1 − alpha)·P)`; the default `alpha = 0.9`
/// gives `10PR / (P + 9R)`. [`MeteorConfig::recall_weighted`] swaps the
/// roles to the `10PR / (R + 9P)` form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeteorConfig {
    pub alpha: f64,
    pub recall_weighted: bool,
    pub gamma: f64,
    pub beta: f64,
}

impl Default for MeteorConfig {
    fn default() -> Self {
        MeteorConfig {
            alpha: 0.9,
            recall_weighted: false,
            gamma: 0.5,
            beta: 3.0,
        }
    }
}

impl MeteorConfig {
    pub fn recall_weighted() -> Self {
        MeteorConfig {
            recall_weighted: true,
            ..Default::default()
        }
    }

    pub fn fmean(&self, p: f64, r: f64) -> f64 {
        if p == 0.0 || r == 0.0 {
            return 0.0;
        }
        if self.recall_weighted {
            p * r / (self.alpha * p + (1.0 - self.alpha) * r)
        } else {
            p * r / (self.alpha * r + (1.0 - self.alpha) * p)
        }
    }

    pub fn penalty(&self, chunks: usize, matches: usize) -> f64 {
        if matches == 0 {
            return 0.0;
        }
        self.gamma * (chunks as f64 / matches as f64).powf(self.beta)
    }
}

/// Hypothesis index → reference index for every aligned token.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Alignment {
    pub pairs: Vec<(usize, usize)>,
}

impl Alignment {
    pub fn matches(&self) -> usize {
        self.pairs.len()
    }

    /// Runs of consecutive hypothesis tokens aligned to consecutive reference tokens.
    pub fn chunks(&self) -> usize {
        let mut pairs = self.pairs.clone();
        pairs.sort_unstable();
        let mut chunks = 0;
        let mut prev: Option<(usize, usize)> = None;
        for (h, r) in pairs {
            match prev {
                Some((ph, pr)) if h == ph + 1 && r == pr + 1 => {}
                _ => chunks += 1,
            }
            prev = Some((h, r));
        }
        chunks
    }

    /// Exact stage, then Porter-stem stage on what is left.
    ///
    /// Within a stage each unaligned hypothesis token (left to right) takes the
    /// reference position that continues the previous token's chunk when one
    /// qualifies, otherwise the leftmost free match.
    pub fn build(hyp: &[String], reference: &[String]) -> Self {
        let mut hyp_to_ref: Vec<Option<usize>> = vec![None; hyp.len()];
        let mut ref_used = vec![false; reference.len()];
        let stems_h: Vec<String> = hyp.iter().map(|t| porter_stemmer::stem(t)).collect();
        let stems_r: Vec<String> = reference.iter().map(|t| porter_stemmer::stem(t)).collect();
        let stages: [(&[String], &[String]); 2] = [(hyp, reference), (&stems_h, &stems_r)];
        for (keys_h, keys_r) in stages {
            for i in 0..hyp.len() {
                if hyp_to_ref[i].is_some() {
                    continue;
                }
                let free = |j: usize| !ref_used[j] && keys_r[j] == keys_h[i];
                let continuing = i
                    .checked_sub(1)
                    .and_then(|p| hyp_to_ref[p])
                    .map(|pj| pj + 1)
                    .filter(|&j| j < reference.len() && free(j));
                if let Some(j) = continuing.or_else(|| (0..reference.len()).find(|&j| free(j))) {
                    hyp_to_ref[i] = Some(j);
                    ref_used[j] = true;
                }
            }
        }
        Alignment {
            pairs: hyp_to_ref
                .iter()
                .enumerate()
                .filter_map(|(i, j)| j.map(|j| (i, j)))
                .collect(),
        }
    }
}

pub fn meteor(pair: &ScoredPair) -> f64 {
    meteor_with(pair, &MeteorConfig::default())
}

pub fn meteor_with(pair: &ScoredPair, config: &MeteorConfig) -> f64 {
    let alignment = Alignment::build(&pair.hypothesis, &pair.reference);
    let m = alignment.matches();
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / pair.hypothesis.len() as f64;
    let r = m as f64 / pair.reference.len() as f64;
    let score = config.fmean(p, r) * (1.0 - config.penalty(alignment.chunks(), m));
    score.clamp(0.0, 1.0)
}

/// Mean sentence-level METEOR.
pub fn meteor_corpus(corpus: &[ScoredPair]) -> Result<f64, MetricError> {
    check_corpus(corpus)?;
    Ok(corpus.iter().map(meteor).sum::<f64>() / corpus.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_sentence() {
        let p = ScoredPair::from_text("the cat sat on the mat", "the cat sat on the mat");
        let expected = 1.0 - 0.5 * (1.0f64 / 6.0).powi(3);
        assert!((meteor(&p) - expected).abs() < 1e-12);
    }

    #[test]
    fn stem_stage_matches_plural() {
        let p = ScoredPair::from_text("cats sitting", "cat sat");
        let a = Alignment::build(&p.hypothesis, &p.reference);
        assert_eq!(a.pairs, vec![(0, 0)]);
        // P = R = 1/2, one chunk over one match
        assert!((meteor(&p) - 0.5 * (1.0 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn no_overlap_is_zero() {
        assert_eq!(meteor(&ScoredPair::from_text("a b", "c d")), 0.0);
    }

    #[test]
    fn weighting_direction() {
        let c = MeteorConfig::default();
        assert!((c.fmean(0.5, 1.0) - 10.0 * 0.5 / (0.5 + 9.0)).abs() < 1e-12);
        let s = MeteorConfig::recall_weighted();
        assert!((s.fmean(0.5, 1.0) - 10.0 * 0.5 / (1.0 + 4.5)).abs() < 1e-12);
    }

    #[test]
    fn chunk_counting() {
        let p = ScoredPair::from_text("b a c", "a b c");
        let a = Alignment::build(&p.hypothesis, &p.reference);
        assert_eq!(a.matches(), 3);
        assert_eq!(a.chunks(), 3);
        let q = ScoredPair::from_text("the cat the cat", "the cat the cat");
        assert_eq!(Alignment::build(&q.hypothesis, &q.reference).chunks(), 1);
    }

    #[test]
    fn penalty_grows_with_chunks() {
        let c = MeteorConfig::default();
        for m in 1..10 {
            for ch in 1..m {
                assert!(c.penalty(ch + 1, m) > c.penalty(ch, m));
            }
        }
    }
}
