//! Binned variance importance.
//!
//! Each parameter partitions the complete trials into bins (quartiles of the
//! sampling-scale value, or one bin per choice). An additive model with one
//! effect per bin is fitted by backfitting; with independent samples this is
//! the plain between-bin variance, and with the correlated samples a model
//! based sampler produces it keeps a bystander from borrowing the active
//! parameter's effect. A parameter's raw score is its effect's sum of
//! squares, less `(k-1)` residual mean squares, over the total; the
//! correction keeps an ignored parameter near zero instead of at the share
//! chance alone gives it. Scores are clamped at zero and normalised to sum
//! to one. Importance is most trustworthy on studies sampled uniformly.

use std::collections::BTreeMap;

use super::space::ParamKind;
use super::study::Study;
use super::HpoError;

pub const MIN_IMPORTANCE_TRIALS: usize = 8;
const BACKFIT_SWEEPS: usize = 200;

fn bins(kind: &ParamKind, xs: &[f64]) -> Vec<usize> {
    match kind {
        ParamKind::Categorical { .. } => xs.iter().map(|x| *x as usize).collect(),
        ParamKind::Float { .. } => {
            let mut sorted = xs.to_vec();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len();
            let cuts: Vec<f64> = [1, 2, 3].iter().map(|q| sorted[(q * n) / 4]).collect();
            xs.iter().map(|x| cuts.iter().filter(|c| x >= c).count()).collect()
        }
    }
}

/// Additive binned model `y = mean + sum_j f_j(bin_j)` fitted by
/// backfitting. Returns the bias-corrected variance share of each `f_j`.
fn explained(bins: &[Vec<usize>], ys: &[f64]) -> Vec<f64> {
    let n = ys.len();
    let mean = ys.iter().sum::<f64>() / n as f64;
    let total: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    if total <= 0.0 {
        return vec![0.0; bins.len()];
    }
    let n_bins: Vec<usize> = bins.iter().map(|b| b.iter().max().map_or(0, |m| m + 1)).collect();
    let mut effects: Vec<Vec<f64>> = n_bins.iter().map(|&k| vec![0.0; k]).collect();
    let fitted = |effects: &[Vec<f64>], i: usize, skip: usize| -> f64 {
        (0..bins.len()).filter(|&j| j != skip).map(|j| effects[j][bins[j][i]]).sum()
    };
    for _ in 0..BACKFIT_SWEEPS {
        let mut change: f64 = 0.0;
        for j in 0..bins.len() {
            let mut sums = vec![(0.0, 0.0); n_bins[j]];
            for i in 0..n {
                let r = ys[i] - mean - fitted(&effects, i, j);
                sums[bins[j][i]].0 += r;
                sums[bins[j][i]].1 += 1.0;
            }
            let new: Vec<f64> = sums.iter().map(|(s, c)| if *c > 0.0 { s / c } else { 0.0 }).collect();
            let centre = (0..n).map(|i| new[bins[j][i]]).sum::<f64>() / n as f64;
            for (e, v) in effects[j].iter_mut().zip(new) {
                change = change.max((*e - (v - centre)).abs());
                *e = v - centre;
            }
        }
        if change < 1e-12 * total.sqrt() {
            break;
        }
    }
    let residual: f64 = (0..n).map(|i| (ys[i] - mean - fitted(&effects, i, usize::MAX)).powi(2)).sum();
    let used: Vec<usize> = bins
        .iter()
        .map(|b| b.iter().collect::<std::collections::BTreeSet<_>>().len())
        .collect();
    let dof = n as f64 - 1.0 - used.iter().map(|k| (k - 1) as f64).sum::<f64>();
    let ms_residual = if dof > 0.0 { residual / dof } else { 0.0 };
    (0..bins.len())
        .map(|j| {
            let ss: f64 = (0..n).map(|i| effects[j][bins[j][i]].powi(2)).sum();
            ((ss - (used[j] - 1) as f64 * ms_residual) / total).max(0.0)
        })
        .collect()
}

/// Importance score per parameter over the study's complete trials.
pub fn param_importance(study: &Study) -> Result<BTreeMap<String, f64>, HpoError> {
    let rows: Vec<(Vec<f64>, f64)> = study
        .complete_trials()
        .filter_map(|t| {
            let xs: Option<Vec<f64>> = study
                .space
                .params
                .iter()
                .map(|p| t.params.get(&p.name).and_then(|v| p.to_internal(v)))
                .collect();
            Some((xs?, t.value?))
        })
        .collect();
    if rows.len() < MIN_IMPORTANCE_TRIALS {
        return Err(HpoError::TooFewTrials {
            needed: MIN_IMPORTANCE_TRIALS,
            got: rows.len(),
        });
    }
    let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let binned: Vec<Vec<usize>> = study
        .space
        .params
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let xs: Vec<f64> = rows.iter().map(|r| r.0[j]).collect();
            bins(&p.kind, &xs)
        })
        .collect();
    let raw = explained(&binned, &ys);
    let sum: f64 = raw.iter().sum();
    let m = raw.len() as f64;
    Ok(study
        .space
        .params
        .iter()
        .zip(raw)
        .map(|(p, r)| (p.name.clone(), if sum > 0.0 { r / sum } else { 1.0 / m }))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hpo::{run_study, Direction, HpoError, ParamSpec, SamplerKind, SearchSpace, StudyOptions, TrialHandle};

    fn space() -> SearchSpace {
        SearchSpace::new(
            "ab",
            Direction::Maximize,
            vec![
                ParamSpec::float("a", 0.0, 1.0, false),
                ParamSpec::categorical("b", vec!["x".into(), "y".into(), "z".into()]),
            ],
        )
        .unwrap()
    }

    fn study(n: usize, f: &(dyn Fn(&mut TrialHandle<'_>) -> Result<f64, HpoError> + Sync)) -> Study {
        let o = StudyOptions {
            n_trials: n,
            sampler: SamplerKind::Random,
            ..Default::default()
        };
        run_study(space(), &f, &o).unwrap()
    }

    #[test]
    fn quartile_bins() {
        let kind = ParamKind::Float { low: 0.0, high: 8.0, log: false };
        let xs: Vec<f64> = (0..8).map(f64::from).collect();
        assert_eq!(bins(&kind, &xs), vec![0, 0, 1, 1, 2, 2, 3, 3]);
    }

    #[test]
    fn hand_computed_epsilon_squared() {
        // one factor, groups {1,3} and {5,7}: SS_t = 20, SS_b = 16, MS_w = 4/2
        let e = explained(&[vec![0, 0, 1, 1]], &[1.0, 3.0, 5.0, 7.0]);
        assert!((e[0] - (16.0 - 2.0) / 20.0).abs() < 1e-12);
        assert_eq!(explained(&[vec![0, 1]], &[2.0, 2.0]), vec![0.0]);
    }

    #[test]
    fn active_dominates_dummy() {
        let s = study(40, &|t| t.param_f64("a").map(|a| a * a));
        let imp = param_importance(&s).unwrap();
        assert!(imp["a"] >= 0.9 && imp["b"] <= 0.1, "{imp:?}");
        assert!((imp.values().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn categorical_can_dominate() {
        let s = study(40, &|t| Ok(if t.param("b")? == "y" { 1.0 } else { 0.0 }));
        let imp = param_importance(&s).unwrap();
        assert!(imp["b"] > 0.75 && imp["b"] > imp["a"], "{imp:?}");
    }

    #[test]
    fn flat_objective_and_too_few() {
        let s = study(10, &|_| Ok(1.0));
        assert_eq!(param_importance(&s).unwrap()["a"], 0.5);
        assert!(matches!(
            param_importance(&study(7, &|_| Ok(1.0))),
            Err(HpoError::TooFewTrials { needed: 8, got: 7 })
        ));
    }
}
