use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Direction, HpoError};

/// Parameter values of one trial, keyed by parameter name.
pub type Params = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ParamKind {
    Float {
        low: f64,
        high: f64,
        #[serde(default)]
        log: bool,
    },
    Categorical { choices: Vec<Value> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ParamKind,
}

impl ParamSpec {
    pub fn float(name: &str, low: f64, high: f64, log: bool) -> Self {
        ParamSpec {
            name: name.into(),
            kind: ParamKind::Float { low, high, log },
        }
    }

    pub fn categorical(name: &str, choices: Vec<Value>) -> Self {
        ParamSpec {
            name: name.into(),
            kind: ParamKind::Categorical { choices },
        }
    }

    pub fn validate(&self) -> Result<(), HpoError> {
        let bad = |m: String| Err(HpoError::Space(format!("{}: {m}", self.name)));
        match &self.kind {
            ParamKind::Float { low, high, log } => {
                if !(low.is_finite() && high.is_finite()) || low >= high {
                    return bad(format!("need finite low < high, got [{low}, {high}]"));
                }
                if *log && *low <= 0.0 {
                    return bad("log scale needs low > 0".into());
                }
            }
            ParamKind::Categorical { choices } => {
                if choices.is_empty() {
                    return bad("no choices".into());
                }
                let distinct: BTreeSet<String> = choices.iter().map(Value::to_string).collect();
                if distinct.len() != choices.len() {
                    return bad("choices are not distinct".into());
                }
            }
        }
        Ok(())
    }

    /// Sampling-scale bounds of a float parameter (log-transformed if `log`).
    pub fn internal_bounds(&self) -> Option<(f64, f64)> {
        match self.kind {
            ParamKind::Float { low, high, log: true } => Some((low.ln(), high.ln())),
            ParamKind::Float { low, high, log: false } => Some((low, high)),
            ParamKind::Categorical { .. } => None,
        }
    }

    /// Float in sampling scale, or choice index, as an `f64`.
    pub fn to_internal(&self, value: &Value) -> Option<f64> {
        match &self.kind {
            ParamKind::Float { low, high, log } => {
                let x = value.as_f64().filter(|x| *x >= *low && *x <= *high)?;
                Some(if *log { x.ln() } else { x })
            }
            ParamKind::Categorical { choices } => choices.iter().position(|c| c == value).map(|i| i as f64),
        }
    }

    pub fn from_internal(&self, x: f64) -> Value {
        match &self.kind {
            ParamKind::Float { low, high, log } => {
                let v = if *log { x.exp() } else { x };
                Value::from(v.clamp(*low, *high))
            }
            ParamKind::Categorical { choices } => choices[(x as usize).min(choices.len() - 1)].clone(),
        }
    }

    /// Uniform draw: linear, log-uniform or uniform over choices.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Value {
        match &self.kind {
            ParamKind::Float { .. } => {
                let (lo, hi) = self.internal_bounds().expect("float");
                self.from_internal(rng.gen_range(lo..=hi))
            }
            ParamKind::Categorical { choices } => choices[rng.gen_range(0..choices.len())].clone(),
        }
    }
}

/// A search space file: parameters plus study metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub name: String,
    #[serde(default)]
    pub direction: Direction,
    /// What the trial value means.
    #[serde(default)]
    pub objective: String,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    pub params: Vec<ParamSpec>,
}

fn default_trials() -> usize {
    20
}

const BUNDLED: [(&str, &str); 4] = [
    ("dm", include_str!("../../data/spaces/dm.json")),
    ("nlg", include_str!("../../data/spaces/nlg.json")),
    ("nlu_bert", include_str!("../../data/spaces/nlu_bert.json")),
    ("nlu_lstm", include_str!("../../data/spaces/nlu_lstm.json")),
];

impl SearchSpace {
    pub fn new(name: &str, direction: Direction, params: Vec<ParamSpec>) -> Result<Self, HpoError> {
        let s = SearchSpace {
            name: name.into(),
            direction,
            objective: String::new(),
            n_trials: default_trials(),
            params,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn bundled_names() -> impl Iterator<Item = &'static str> {
        BUNDLED.iter().map(|(n, _)| *n)
    }

    pub fn bundled(name: &str) -> Option<Self> {
        BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, json)| Self::from_json(json).expect("bundled space is valid"))
    }

    pub fn from_json(json: &str) -> Result<Self, HpoError> {
        let s: SearchSpace = serde_json::from_str(json).map_err(|e| HpoError::Space(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Reads a space file, or a bundled space when `path` names one.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HpoError> {
        let path = path.as_ref();
        if !path.exists() {
            if let Some(s) = path.to_str().and_then(Self::bundled) {
                return Ok(s);
            }
        }
        let text = std::fs::read_to_string(path).map_err(|e| HpoError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HpoError> {
        if self.params.is_empty() {
            return Err(HpoError::Space("no parameters".into()));
        }
        let mut seen = BTreeSet::new();
        for p in &self.params {
            if !seen.insert(&p.name) {
                return Err(HpoError::Space(format!("duplicate parameter {}", p.name)));
            }
            p.validate()?;
        }
        Ok(())
    }

    /// Checks that `params` has exactly this space's names, each in range.
    pub fn check(&self, params: &Params) -> Result<(), HpoError> {
        for p in &self.params {
            let v = params
                .get(&p.name)
                .ok_or_else(|| HpoError::OutOfSpace(format!("missing {}", p.name)))?;
            if p.to_internal(v).is_none() {
                return Err(HpoError::OutOfSpace(format!("{} = {v} is outside the space", p.name)));
            }
        }
        if let Some(extra) = params.keys().find(|k| !self.params.iter().any(|p| &p.name == *k)) {
            return Err(HpoError::OutOfSpace(format!("unknown parameter {extra}")));
        }
        Ok(())
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Params {
        self.params.iter().map(|p| (p.name.clone(), p.sample_uniform(rng))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream_rng;

    #[test]
    fn bundled_spaces_load() {
        for name in SearchSpace::bundled_names() {
            let s = SearchSpace::bundled(name).unwrap();
            assert_eq!(s.direction, Direction::Maximize);
        }
        let dm = SearchSpace::bundled("dm").unwrap();
        assert_eq!(dm.params.len(), 4);
        assert_eq!(dm.params[0].kind, ParamKind::Float { low: 1e-4, high: 1e-2, log: true });
    }

    #[test]
    fn invalid_specs() {
        assert!(ParamSpec::float("a", 1.0, 1.0, false).validate().is_err());
        assert!(ParamSpec::float("a", 0.0, 1.0, true).validate().is_err());
        assert!(ParamSpec::categorical("c", vec![1.into(), 1.into()]).validate().is_err());
        assert!(ParamSpec::categorical("c", vec![]).validate().is_err());
        let dup = vec![ParamSpec::float("a", 0.0, 1.0, false), ParamSpec::float("a", 0.0, 1.0, false)];
        assert!(SearchSpace::new("x", Direction::Maximize, dup).is_err());
    }

    #[test]
    fn check_rejects_out_of_space() {
        let s = SearchSpace::bundled("nlg").unwrap();
        let mut p = s.sample_uniform(&mut stream_rng(1, 0));
        s.check(&p).unwrap();
        p.insert("batch_size".into(), 5.into());
        assert!(matches!(s.check(&p), Err(HpoError::OutOfSpace(_))));
        p.insert("batch_size".into(), 8.into());
        p.insert("learning_rate".into(), 1.0.into());
        assert!(s.check(&p).is_err());
        p.insert("learning_rate".into(), 5e-5.into());
        p.insert("extra".into(), 1.into());
        assert!(s.check(&p).is_err());
    }

    #[test]
    fn uniform_samples_in_bounds() {
        let s = SearchSpace::bundled("nlu_lstm").unwrap();
        let mut rng = stream_rng(9, 0);
        for _ in 0..500 {
            s.check(&s.sample_uniform(&mut rng)).unwrap();
        }
    }
}
