//! Hyperparameter studies: search spaces, random and TPE samplers, median
//! pruning, JSONL persistence and binned parameter importance.

mod importance;
pub mod objectives;
mod pruner;
mod space;
mod study;
mod tpe;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use importance::{param_importance, MIN_IMPORTANCE_TRIALS};
pub use pruner::MedianPruner;
pub use space::{ParamKind, ParamSpec, Params, SearchSpace};
pub use study::{run_study, Objective, SamplerKind, Study, StudyOptions, Trial, TrialHandle, TrialStatus};
pub use tpe::{suggest, TpeConfig};

#[derive(Debug, Error)]
pub enum HpoError {
    #[error("invalid search space: {0}")]
    Space(String),
    #[error("parameters outside the search space: {0}")]
    OutOfSpace(String),
    #[error("need at least {needed} complete trials, have {got}")]
    TooFewTrials { needed: usize, got: usize },
    #[error("trial pruned at step {step}")]
    Pruned { step: usize },
    #[error("trial {trial} has no intermediate value at step {step}")]
    NoIntermediate { trial: usize, step: usize },
    #[error("objective failed: {0}")]
    Objective(String),
    #[error("study log: {0}")]
    Log(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Maximize,
    Minimize,
}

impl Direction {
    /// True if `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Maximize => a > b,
            Direction::Minimize => a < b,
        }
    }

    /// Orders values best first.
    pub fn sort_best_first(self, values: &mut [f64]) {
        values.sort_by(|a, b| a.total_cmp(b));
        if self == Direction::Maximize {
            values.reverse();
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Maximize => "maximize",
            Direction::Minimize => "minimize",
        })
    }
}
