//! Ready-made objectives: dialogue-manager training, an external-process
//! shim, and analytic benchmarks for exercising the engine.

use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};

use super::space::{ParamSpec, SearchSpace};
use super::study::TrialHandle;
use super::{Direction, HpoError};
use crate::agent::{AgentHyperParams, Variant};
use crate::dialogue::{train_dm, DialogueEnv, TrainConfig};

/// Trains a dialogue manager per trial and scores the final greedy success
/// rate. Each measurement window reports its interim evaluation (or the
/// training success rate when interim evaluation is off) at step
/// `end_episode`, so the pruner can stop weak configurations early.
pub struct DmObjective {
    pub env: DialogueEnv,
    pub variant: Variant,
    /// Defaults for fields the search space leaves out.
    pub base: AgentHyperParams,
    /// `seed` is replaced by the trial seed.
    pub config: TrainConfig,
}

impl DmObjective {
    pub fn new(env: DialogueEnv, variant: Variant, episodes: usize) -> Self {
        DmObjective {
            env,
            variant,
            base: AgentHyperParams::default(),
            config: TrainConfig {
                episodes,
                measure_every: (episodes / 10).max(1),
                ..TrainConfig::default()
            },
        }
    }

    /// Overlays trial parameters onto `base` by field name.
    pub fn hyper_for(&self, params: &super::Params) -> Result<AgentHyperParams, HpoError> {
        let mut fields = serde_json::to_value(&self.base).map_err(|e| HpoError::Objective(e.to_string()))?;
        let obj = fields.as_object_mut().expect("struct serialises to an object");
        for (k, v) in params {
            if !obj.contains_key(k) {
                return Err(HpoError::Objective(format!("{k} is not an agent hyperparameter")));
            }
            obj.insert(k.clone(), v.clone());
        }
        let hyper: AgentHyperParams = serde_json::from_value(fields).map_err(|e| HpoError::Objective(e.to_string()))?;
        hyper.validate().map_err(|e| HpoError::Objective(e.to_string()))?;
        Ok(hyper)
    }
}

impl super::Objective for DmObjective {
    fn evaluate(&self, trial: &mut TrialHandle<'_>) -> Result<f64, HpoError> {
        let hyper = self.hyper_for(trial.params())?;
        let config = TrainConfig {
            seed: trial.seed(),
            ..self.config.clone()
        };
        let mut stop: Option<HpoError> = None;
        let (_, report) = train_dm(&self.env, self.variant, hyper, &config, |w| {
            let value = w.eval.map_or(w.success_rate, |e| e.success_rate);
            match trial.report(w.end_episode, value) {
                Ok(()) => true,
                Err(e) => {
                    stop = Some(e);
                    false
                }
            }
        })
        .map_err(|e| HpoError::Objective(e.to_string()))?;
        match stop {
            Some(e) => Err(e),
            None => Ok(report.final_eval.success_rate),
        }
    }
}

/// Runs one child process per trial.
///
/// The child receives a single JSON line on stdin,
/// `{"trial": id, "seed": s, "params": {...}, "space": name}`, and answers
/// with JSON lines on stdout: any number of `{"step": n, "value": v}`
/// intermediate reports, then `{"value": v}` or `{"error": text}`. A pruned
/// child is killed. Lines that are not JSON objects are ignored so the child
/// may log freely.
pub struct ExternalObjective {
    pub argv: Vec<String>,
    pub space: String,
    /// Longest silence tolerated between two output lines.
    pub timeout: Duration,
}

#[derive(Deserialize)]
struct ShimLine {
    step: Option<usize>,
    value: Option<f64>,
    error: Option<String>,
}

impl ExternalObjective {
    pub fn new(argv: Vec<String>, space: &str) -> Self {
        ExternalObjective {
            argv,
            space: space.into(),
            timeout: Duration::from_secs(3600),
        }
    }

    /// Splits a command line on whitespace.
    pub fn from_command(command: &str, space: &str) -> Result<Self, HpoError> {
        let argv: Vec<String> = command.split_whitespace().map(str::to_string).collect();
        if argv.is_empty() {
            return Err(HpoError::Objective("empty objective command".into()));
        }
        Ok(Self::new(argv, space))
    }
}

impl super::Objective for ExternalObjective {
    fn evaluate(&self, trial: &mut TrialHandle<'_>) -> Result<f64, HpoError> {
        let fail = |m: String| HpoError::Objective(format!("{}: {m}", self.argv[0]));
        let mut child = Command::new(&self.argv[0])
            .args(&self.argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| fail(e.to_string()))?;
        let request = json!({
            "trial": trial.id(),
            "seed": trial.seed(),
            "params": trial.params(),
            "space": self.space,
        });
        {
            let mut stdin = child.stdin.take().expect("piped stdin");
            // a child that exits without reading is reported by its output
            let _ = writeln!(stdin, "{request}");
        }
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });

        let outcome = loop {
            let line = match rx.recv_timeout(self.timeout) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => break Err(fail(e.to_string())),
                Err(mpsc::RecvTimeoutError::Timeout) => break Err(fail(format!("no output for {:?}", self.timeout))),
                Err(mpsc::RecvTimeoutError::Disconnected) => break Err(fail("exited without a final value".into())),
            };
            let Ok(msg) = serde_json::from_str::<ShimLine>(&line) else {
                log::debug!("objective output: {line}");
                continue;
            };
            match msg {
                ShimLine { error: Some(e), .. } => break Err(fail(e)),
                ShimLine {
                    step: Some(step),
                    value: Some(v),
                    ..
                } => {
                    if let Err(e) = trial.report(step, v) {
                        break Err(e);
                    }
                }
                ShimLine {
                    step: None, value: Some(v), ..
                } => break Ok(v),
                _ => log::debug!("objective output: {line}"),
            }
        };
        if outcome.is_err() {
            let _ = child.kill();
        }
        let _ = child.wait();
        outcome
    }
}

/// One float `x` in [0, 1]; see [`quadratic`].
pub fn quadratic_space() -> SearchSpace {
    SearchSpace::new("quadratic", Direction::Maximize, vec![ParamSpec::float("x", 0.0, 1.0, false)]).expect("valid")
}

/// `-(x - 0.3)^2`, maximised at 0.3.
pub fn quadratic(trial: &mut TrialHandle<'_>) -> Result<f64, HpoError> {
    let x = trial.param_f64("x")?;
    Ok(-(x - 0.3).powi(2))
}

/// One float `level` in [0, 1]; see [`Staircase`].
pub fn staircase_space() -> SearchSpace {
    SearchSpace::new("staircase", Direction::Maximize, vec![ParamSpec::float("level", 0.0, 1.0, false)])
        .expect("valid")
}

/// Reports `level * step` at steps `1..=steps` and returns the last report.
#[derive(Debug, Clone, Copy)]
pub struct Staircase {
    pub steps: usize,
}

impl super::Objective for Staircase {
    fn evaluate(&self, trial: &mut TrialHandle<'_>) -> Result<f64, HpoError> {
        let level = trial.param_f64("level")?;
        let mut value = 0.0;
        for step in 1..=self.steps {
            value = level * step as f64;
            trial.report(step, value)?;
        }
        Ok(value)
    }
}

/// Floats `active` and `dummy` in [0, 1]; see [`active_only`].
pub fn two_param_space() -> SearchSpace {
    SearchSpace::new(
        "active-dummy",
        Direction::Maximize,
        vec![
            ParamSpec::float("active", 0.0, 1.0, false),
            ParamSpec::float("dummy", 0.0, 1.0, false),
        ],
    )
    .expect("valid")
}

/// Strictly increasing in `active`; ignores `dummy`.
pub fn active_only(trial: &mut TrialHandle<'_>) -> Result<f64, HpoError> {
    let a = trial.param_f64("active")?;
    Ok(a + a.powi(3))
}

/// A parameter map from `(name, value)` pairs.
pub fn params(pairs: &[(&str, Value)]) -> super::Params {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}
