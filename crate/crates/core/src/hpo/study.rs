//! Study orchestration and persistence.
//!
//! Trials run in batches of `parallelism`: every trial in a batch is
//! suggested from the same snapshot of finished trials, then evaluated on its
//! own thread, then appended in id order. The sampler rng for trial `i` is
//! stream `i` of the study seed, so a study is reproducible for a fixed
//! parallelism, and a resumed study matches an uninterrupted one whenever it
//! was stopped on a batch boundary.
//!
//! The log is JSON lines: a `{"record":"study",...}` header followed by one
//! `{"record":"trial",...}` line per finished trial.

use std::collections::VecDeque;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::pruner::MedianPruner;
use super::space::{Params, SearchSpace};
use super::tpe::{suggest, TpeConfig};
use super::{Direction, HpoError};
use crate::{mix_seed, stream_rng};

const TRIAL_SEED_STREAM: u64 = 0x7e1a;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Random,
    #[default]
    Tpe,
}

impl std::str::FromStr for SamplerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(SamplerKind::Random),
            "tpe" => Ok(SamplerKind::Tpe),
            other => Err(format!("unknown sampler `{other}` (expected tpe or random)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Running,
    Complete,
    Pruned,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub id: usize,
    /// Seed handed to the objective.
    pub seed: u64,
    pub params: Params,
    /// `(step, value)` pairs with strictly increasing steps.
    #[serde(default)]
    pub intermediate: Vec<(usize, f64)>,
    #[serde(default)]
    pub value: Option<f64>,
    pub status: TrialStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Trial {
    pub fn new(id: usize, seed: u64, params: Params) -> Self {
        Trial {
            id,
            seed,
            params,
            intermediate: Vec::new(),
            value: None,
            status: TrialStatus::Running,
            error: None,
        }
    }

    pub fn value_at(&self, step: usize) -> Option<f64> {
        self.intermediate.iter().find(|(s, _)| *s == step).map(|(_, v)| *v)
    }

    pub fn last_step(&self) -> Option<usize> {
        self.intermediate.last().map(|(s, _)| *s)
    }
}

/// What an objective sees of its trial.
pub struct TrialHandle<'a> {
    trial: Trial,
    history: &'a [Trial],
    direction: Direction,
    pruner: Option<MedianPruner>,
}

impl TrialHandle<'_> {
    pub fn id(&self) -> usize {
        self.trial.id
    }

    pub fn seed(&self) -> u64 {
        self.trial.seed
    }

    pub fn params(&self) -> &Params {
        &self.trial.params
    }

    pub fn param(&self, name: &str) -> Result<&Value, HpoError> {
        self.trial
            .params
            .get(name)
            .ok_or_else(|| HpoError::Objective(format!("trial has no parameter {name}")))
    }

    pub fn param_f64(&self, name: &str) -> Result<f64, HpoError> {
        let v = self.param(name)?;
        v.as_f64().ok_or_else(|| HpoError::Objective(format!("{name} = {v} is not a number")))
    }

    pub fn param_usize(&self, name: &str) -> Result<usize, HpoError> {
        let v = self.param(name)?;
        v.as_u64()
            .map(|u| u as usize)
            .ok_or_else(|| HpoError::Objective(format!("{name} = {v} is not a count")))
    }

    pub fn intermediate(&self) -> &[(usize, f64)] {
        &self.trial.intermediate
    }

    /// Records an intermediate value. Returns `Err(Pruned)` when the pruner
    /// decides the trial should stop; objectives should propagate it.
    pub fn report(&mut self, step: usize, value: f64) -> Result<(), HpoError> {
        if !value.is_finite() {
            return Err(HpoError::Objective(format!("non-finite value {value} at step {step}")));
        }
        if self.trial.last_step().is_some_and(|last| step <= last) {
            return Err(HpoError::Objective(format!("step {step} does not increase")));
        }
        self.trial.intermediate.push((step, value));
        if let Some(p) = self.pruner {
            if p.should_prune(self.history, self.direction, &self.trial, step)? {
                return Err(HpoError::Pruned { step });
            }
        }
        Ok(())
    }
}

/// A trial runner. Must be deterministic given the params and trial seed.
pub trait Objective: Sync {
    fn evaluate(&self, trial: &mut TrialHandle<'_>) -> Result<f64, HpoError>;
}

impl<F> Objective for F
where
    F: Fn(&mut TrialHandle<'_>) -> Result<f64, HpoError> + Sync,
{
    fn evaluate(&self, trial: &mut TrialHandle<'_>) -> Result<f64, HpoError> {
        self(trial)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyOptions {
    pub n_trials: usize,
    pub sampler: SamplerKind,
    pub seed: u64,
    pub parallelism: usize,
    pub tpe: TpeConfig,
    pub pruner: Option<MedianPruner>,
    /// JSONL log written as trials finish.
    pub log: Option<PathBuf>,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            n_trials: 20,
            sampler: SamplerKind::Tpe,
            seed: 0,
            parallelism: 1,
            tpe: TpeConfig::default(),
            pruner: Some(MedianPruner::default()),
            log: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    space: SearchSpace,
    sampler: SamplerKind,
    seed: u64,
    tpe: TpeConfig,
    pruner: Option<MedianPruner>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum Record {
    Study(Header),
    Trial(Trial),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub space: SearchSpace,
    pub sampler: SamplerKind,
    pub seed: u64,
    pub tpe: TpeConfig,
    pub pruner: Option<MedianPruner>,
    trials: Vec<Trial>,
    queue: VecDeque<Params>,
    log: Option<PathBuf>,
}

impl Study {
    pub fn new(space: SearchSpace, sampler: SamplerKind, seed: u64) -> Self {
        Study {
            space,
            sampler,
            seed,
            tpe: TpeConfig::default(),
            pruner: Some(MedianPruner::default()),
            trials: Vec::new(),
            queue: VecDeque::new(),
            log: None,
        }
    }

    pub fn from_options(space: SearchSpace, options: &StudyOptions) -> Self {
        Study {
            tpe: options.tpe,
            pruner: options.pruner,
            ..Study::new(space, options.sampler, options.seed)
        }
    }

    pub fn direction(&self) -> Direction {
        self.space.direction
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn complete_trials(&self) -> impl Iterator<Item = &Trial> {
        self.trials.iter().filter(|t| t.status == TrialStatus::Complete)
    }

    pub fn count(&self, status: TrialStatus) -> usize {
        self.trials.iter().filter(|t| t.status == status).count()
    }

    /// Best complete trial; the earliest wins ties.
    pub fn best_trial(&self) -> Option<&Trial> {
        let dir = self.direction();
        self.complete_trials().fold(None, |best: Option<&Trial>, t| match best {
            Some(b) if !dir.better(t.value.unwrap_or(f64::NAN), b.value.unwrap_or(f64::NAN)) => Some(b),
            _ => Some(t),
        })
    }

    /// Fixes the parameters of the next unstarted trial.
    pub fn enqueue(&mut self, params: Params) -> Result<(), HpoError> {
        self.space.check(&params)?;
        self.queue.push_back(params);
        Ok(())
    }

    pub fn trial_seed(&self, id: usize) -> u64 {
        mix_seed(mix_seed(self.seed, TRIAL_SEED_STREAM), id as u64)
    }

    /// Parameters for trial `id` given the finished trials so far.
    pub fn suggest(&self, id: usize) -> Params {
        let mut rng = stream_rng(self.seed, id as u64);
        match self.sampler {
            SamplerKind::Random => self.space.sample_uniform(&mut rng),
            SamplerKind::Tpe => {
                let complete: Vec<(&Params, f64)> =
                    self.complete_trials().filter_map(|t| t.value.map(|v| (&t.params, v))).collect();
                suggest(&self.space, self.direction(), &complete, &self.tpe, &mut rng)
            }
        }
    }

    /// Runs `n_trials` more trials.
    pub fn optimize(&mut self, objective: &dyn Objective, n_trials: usize, parallelism: usize) -> Result<(), HpoError> {
        let k = parallelism.max(1);
        let target = self.trials.len() + n_trials;
        while self.trials.len() < target {
            let start = self.trials.len();
            let batch: Vec<Trial> = (start..target.min(start + k))
                .map(|id| {
                    let params = self.queue.pop_front().unwrap_or_else(|| self.suggest(id));
                    Trial::new(id, self.trial_seed(id), params)
                })
                .collect();
            let (history, direction, pruner) = (&self.trials[..], self.direction(), self.pruner);
            let finished: Vec<Trial> = if batch.len() == 1 {
                batch.into_iter().map(|t| run_trial(objective, t, history, direction, pruner)).collect()
            } else {
                std::thread::scope(|scope| {
                    let handles: Vec<_> = batch
                        .into_iter()
                        .map(|t| scope.spawn(move || run_trial(objective, t, history, direction, pruner)))
                        .collect();
                    handles.into_iter().map(|h| h.join().expect("trial thread")).collect()
                })
            };
            for t in finished {
                log::info!(
                    "trial {} {:?} value {:?} params {}",
                    t.id,
                    t.status,
                    t.value,
                    serde_json::to_string(&t.params).unwrap_or_default()
                );
                self.append_log(&t)?;
                self.trials.push(t);
            }
        }
        Ok(())
    }

    fn header(&self) -> Record {
        Record::Study(Header {
            space: self.space.clone(),
            sampler: self.sampler,
            seed: self.seed,
            tpe: self.tpe,
            pruner: self.pruner,
        })
    }

    fn append_log(&self, trial: &Trial) -> Result<(), HpoError> {
        let Some(path) = &self.log else { return Ok(()) };
        let io = |e| io_err(path, e);
        let mut f = OpenOptions::new().append(true).open(path).map_err(io)?;
        writeln!(f, "{}", encode(&Record::Trial(trial.clone()))?).map_err(io)
    }

    /// Writes the whole study to `path` and keeps appending new trials there.
    pub fn attach_log(&mut self, path: impl AsRef<Path>) -> Result<(), HpoError> {
        self.save(&path)?;
        self.log = Some(path.as_ref().to_path_buf());
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<String, HpoError> {
        let mut out = encode(&self.header())?;
        out.push('\n');
        for t in &self.trials {
            out.push_str(&encode(&Record::Trial(t.clone()))?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), HpoError> {
        let path = path.as_ref();
        let mut f = File::create(path).map_err(|e| io_err(path, e))?;
        f.write_all(self.to_jsonl()?.as_bytes()).map_err(|e| io_err(path, e))
    }

    pub fn from_jsonl<R: BufRead>(reader: R) -> Result<Self, HpoError> {
        let mut study: Option<Study> = None;
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| HpoError::Log(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |m: String| HpoError::Log(format!("line {}: {m}", n + 1));
            let record: Record = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
            match (record, study.as_mut()) {
                (Record::Study(h), None) => {
                    h.space.validate()?;
                    study = Some(Study {
                        tpe: h.tpe,
                        pruner: h.pruner,
                        ..Study::new(h.space, h.sampler, h.seed)
                    });
                }
                (Record::Study(_), Some(_)) => return Err(bad("second study header".into())),
                (Record::Trial(_), None) => return Err(bad("trial before the study header".into())),
                (Record::Trial(t), Some(s)) => {
                    if t.id != s.trials.len() {
                        return Err(bad(format!("expected trial {}, found {}", s.trials.len(), t.id)));
                    }
                    if t.status == TrialStatus::Complete && t.value.is_none() {
                        return Err(bad(format!("complete trial {} has no value", t.id)));
                    }
                    s.space.check(&t.params).map_err(|e| bad(e.to_string()))?;
                    s.trials.push(t);
                }
            }
        }
        study.ok_or_else(|| HpoError::Log("empty study log".into()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HpoError> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| io_err(path, e))?;
        Self::from_jsonl(BufReader::new(f))
    }

    /// Loads a study log and continues appending to it.
    pub fn resume(path: impl AsRef<Path>) -> Result<Self, HpoError> {
        let mut s = Self::load(&path)?;
        s.log = Some(path.as_ref().to_path_buf());
        Ok(s)
    }
}

fn encode(r: &Record) -> Result<String, HpoError> {
    serde_json::to_string(r).map_err(|e| HpoError::Log(e.to_string()))
}

fn io_err(path: &Path, source: std::io::Error) -> HpoError {
    HpoError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn run_trial(
    objective: &dyn Objective,
    trial: Trial,
    history: &[Trial],
    direction: Direction,
    pruner: Option<MedianPruner>,
) -> Trial {
    let mut handle = TrialHandle {
        trial,
        history,
        direction,
        pruner,
    };
    let outcome = catch_unwind(AssertUnwindSafe(|| objective.evaluate(&mut handle)))
        .unwrap_or_else(|_| Err(HpoError::Objective("objective panicked".into())));
    let mut t = handle.trial;
    match outcome {
        Ok(v) if v.is_finite() => {
            t.value = Some(v);
            t.status = TrialStatus::Complete;
        }
        Ok(v) => {
            t.status = TrialStatus::Failed;
            t.error = Some(format!("non-finite objective value {v}"));
        }
        Err(HpoError::Pruned { .. }) => t.status = TrialStatus::Pruned,
        Err(e) => {
            t.status = TrialStatus::Failed;
            t.error = Some(e.to_string());
        }
    }
    t
}

/// Creates a study from `options` and runs `options.n_trials` trials.
pub fn run_study(space: SearchSpace, objective: &dyn Objective, options: &StudyOptions) -> Result<Study, HpoError> {
    let mut study = Study::from_options(space, options);
    if let Some(path) = &options.log {
        study.attach_log(path)?;
    }
    study.optimize(objective, options.n_trials, options.parallelism)?;
    Ok(study)
}
