use serde::{Deserialize, Serialize};

use super::study::{Trial, TrialStatus};
use super::{Direction, HpoError};

/// Stops a trial whose intermediate value is strictly worse than the median
/// of completed trials at the same step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MedianPruner {
    pub warmup_steps: usize,
}

impl MedianPruner {
    pub fn new(warmup_steps: usize) -> Self {
        MedianPruner { warmup_steps }
    }

    /// Median over `history`'s complete trials at `step`, if any reported there.
    pub fn median_at(history: &[Trial], step: usize) -> Option<f64> {
        let mut vals: Vec<f64> = history
            .iter()
            .filter(|t| t.status == TrialStatus::Complete)
            .filter_map(|t| t.value_at(step))
            .collect();
        if vals.is_empty() {
            return None;
        }
        vals.sort_by(f64::total_cmp);
        let n = vals.len();
        Some(if n % 2 == 1 {
            vals[n / 2]
        } else {
            (vals[n / 2 - 1] + vals[n / 2]) / 2.0
        })
    }

    pub fn should_prune(
        &self,
        history: &[Trial],
        direction: Direction,
        trial: &Trial,
        step: usize,
    ) -> Result<bool, HpoError> {
        let value = trial.value_at(step).ok_or(HpoError::NoIntermediate { trial: trial.id, step })?;
        if step < self.warmup_steps {
            return Ok(false);
        }
        Ok(Self::median_at(history, step).is_some_and(|m| direction.better(m, value)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hpo::Params;

    fn trial(id: usize, status: TrialStatus, series: &[(usize, f64)]) -> Trial {
        let mut t = Trial::new(id, 0, Params::new());
        t.intermediate = series.to_vec();
        t.status = status;
        t
    }

    #[test]
    fn hand_built_medians() {
        // completed values at step 3: 0.1 0.4 0.5 0.6 0.9 (median 0.5)
        let hist: Vec<Trial> = [0.1, 0.9, 0.5, 0.4, 0.6]
            .iter()
            .enumerate()
            .map(|(i, v)| trial(i, TrialStatus::Complete, &[(1, 0.0), (3, *v)]))
            .collect();
        let mut pruned = hist.clone();
        pruned.push(trial(9, TrialStatus::Pruned, &[(3, -5.0)]));
        assert_eq!(MedianPruner::median_at(&pruned, 3), Some(0.5));
        let p = MedianPruner::new(0);
        let below = trial(10, TrialStatus::Running, &[(3, 0.45)]);
        assert!(p.should_prune(&hist, Direction::Maximize, &below, 3).unwrap());
        assert!(!p.should_prune(&hist, Direction::Minimize, &below, 3).unwrap());
        let at = trial(11, TrialStatus::Running, &[(3, 0.5)]);
        assert!(!p.should_prune(&hist, Direction::Maximize, &at, 3).unwrap());
        assert!(!MedianPruner::new(4).should_prune(&hist, Direction::Maximize, &below, 3).unwrap());
        // no completed trial reported at step 2
        let other = trial(12, TrialStatus::Running, &[(2, -1.0)]);
        assert!(!p.should_prune(&hist, Direction::Maximize, &other, 2).unwrap());
        assert!(matches!(
            p.should_prune(&hist, Direction::Maximize, &other, 5),
            Err(HpoError::NoIntermediate { step: 5, .. })
        ));
    }

    #[test]
    fn first_trial_never_pruned() {
        let t = trial(0, TrialStatus::Running, &[(1, -100.0)]);
        assert!(!MedianPruner::default().should_prune(&[], Direction::Maximize, &t, 1).unwrap());
    }
}
