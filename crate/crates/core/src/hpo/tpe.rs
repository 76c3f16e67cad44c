//! Tree-structured Parzen estimator.
//!
//! Complete trials are split into a good set (the best `ceil(gamma * n)`)
//! and a bad set. Each parameter gets an independent density per set:
//! a Gaussian mixture in sampling scale for floats (one Scott's-rule kernel
//! per observation plus a wide prior kernel over the whole range), and
//! Laplace-smoothed counts for categoricals. Candidates are drawn from the good densities and the one
//! with the largest `sum(log l - log g)` wins.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::space::{ParamKind, ParamSpec, Params, SearchSpace};
use super::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TpeConfig {
    /// Complete trials needed before the model takes over from uniform draws.
    pub n_startup: usize,
    pub gamma: f64,
    pub n_candidates: usize,
}

impl Default for TpeConfig {
    fn default() -> Self {
        TpeConfig {
            n_startup: 10,
            gamma: 0.25,
            n_candidates: 24,
        }
    }
}

impl TpeConfig {
    pub fn n_good(&self, n: usize) -> usize {
        ((self.gamma * n as f64).ceil() as usize).clamp(1, n.saturating_sub(1).max(1))
    }
}

enum Density {
    /// Gaussian mixture; `mus[0]` is the prior kernel.
    Parzen { mus: Vec<f64>, sigmas: Vec<f64>, lo: f64, hi: f64 },
    Counts(Vec<f64>),
}

impl Density {
    fn fit(spec: &ParamSpec, xs: &[f64]) -> Density {
        match &spec.kind {
            ParamKind::Float { .. } => {
                let (lo, hi) = spec.internal_bounds().expect("float");
                let range = hi - lo;
                let n = xs.len() as f64;
                let mean = xs.iter().sum::<f64>() / n;
                let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
                // Scott's rule, floored so a tight cluster cannot collapse the search
                let floor = range / (1.0 + n).min(100.0);
                let sigma = (1.06 * sd * n.powf(-0.2)).max(floor);
                let mut mus = vec![(lo + hi) / 2.0];
                let mut sigmas = vec![range];
                mus.extend_from_slice(xs);
                sigmas.resize(mus.len(), sigma);
                Density::Parzen { mus, sigmas, lo, hi }
            }
            ParamKind::Categorical { choices } => {
                let mut counts = vec![1.0; choices.len()];
                for &x in xs {
                    counts[x as usize] += 1.0;
                }
                let total: f64 = counts.iter().sum();
                Density::Counts(counts.into_iter().map(|c| c / total).collect())
            }
        }
    }

    fn log_pdf(&self, x: f64) -> f64 {
        match self {
            Density::Parzen { mus, sigmas, .. } => {
                let sum: f64 = mus
                    .iter()
                    .zip(sigmas)
                    .map(|(m, s)| (-0.5 * ((x - m) / s).powi(2)).exp() / s)
                    .sum();
                let norm = (2.0 * std::f64::consts::PI).sqrt() * mus.len() as f64;
                (sum / norm).max(f64::MIN_POSITIVE).ln()
            }
            Density::Counts(p) => p[x as usize].ln(),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Density::Parzen { mus, sigmas, lo, hi } => {
                let k = rng.gen_range(0..mus.len());
                let normal = Normal::new(mus[k], sigmas[k]).expect("positive sigma");
                // resample a few times before clamping so the edges are not overweighted
                for _ in 0..16 {
                    let x = normal.sample(rng);
                    if (*lo..=*hi).contains(&x) {
                        return x;
                    }
                }
                mus[k].clamp(*lo, *hi)
            }
            Density::Counts(p) => WeightedIndex::new(p).expect("positive weights").sample(rng) as f64,
        }
    }
}

/// Proposes the next parameter set from the `(params, value)` pairs of
/// complete trials. Falls back to uniform sampling during start-up.
pub fn suggest<R: Rng + ?Sized>(
    space: &SearchSpace,
    direction: Direction,
    complete: &[(&Params, f64)],
    config: &TpeConfig,
    rng: &mut R,
) -> Params {
    let usable: Vec<(Vec<f64>, f64)> = complete
        .iter()
        .filter_map(|(p, v)| {
            let xs: Option<Vec<f64>> = space.params.iter().map(|s| p.get(&s.name).and_then(|x| s.to_internal(x))).collect();
            xs.map(|xs| (xs, *v))
        })
        .collect();
    if usable.len() < config.n_startup.max(2) {
        return space.sample_uniform(rng);
    }

    let mut order: Vec<usize> = (0..usable.len()).collect();
    order.sort_by(|&a, &b| {
        let c = usable[a].1.total_cmp(&usable[b].1);
        if direction == Direction::Maximize {
            c.reverse()
        } else {
            c
        }
    });
    let n_good = config.n_good(usable.len());
    let (good, bad) = order.split_at(n_good);

    let models: Vec<(Density, Density)> = space
        .params
        .iter()
        .enumerate()
        .map(|(j, spec)| {
            let column = |idx: &[usize]| idx.iter().map(|&i| usable[i].0[j]).collect::<Vec<_>>();
            (Density::fit(spec, &column(good)), Density::fit(spec, &column(bad)))
        })
        .collect();

    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..config.n_candidates.max(1) {
        let xs: Vec<f64> = models.iter().map(|(l, _)| l.sample(rng)).collect();
        let score: f64 = models.iter().zip(&xs).map(|((l, g), &x)| l.log_pdf(x) - g.log_pdf(x)).sum();
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, xs));
        }
    }
    let (_, xs) = best.expect("at least one candidate");
    space
        .params
        .iter()
        .zip(xs)
        .map(|(spec, x)| (spec.name.clone(), spec.from_internal(x)))
        .collect()
}
