//! Versioned run configuration shared by the CLI subcommands.
//!
//! ```json
//! {"version": 1, "seed": 0, "ontology": null, "kb": null, "kb_size": 50,
//!  "kb_seed": 7, "reward": {...}, "agent": {...}, "train": {...}}
//! ```
//!
//! Missing keys take their defaults; unknown keys are rejected so typos do
//! not pass silently. `DIALOFORGE_SEED` overrides `seed`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentHyperParams;
use crate::dialogue::{DialogueEnv, RewardConfig, TrainConfig};
use crate::ontology::{bundled_kb, generate_kb, load_kb, load_ontology, DomainOntology, OntologyError};
use crate::simulator::GoalConfig;

pub const CONFIG_VERSION: u32 = 1;
pub const SEED_ENV: &str = "DIALOFORGE_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("config version {found} is not supported (expected {CONFIG_VERSION})")]
    Version { found: u32 },
    #[error("{SEED_ENV}={0} is not an unsigned integer")]
    SeedEnv(String),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    pub seed: u64,
    /// Ontology file; the bundled restaurant ontology when absent.
    pub ontology: Option<PathBuf>,
    /// KB file; a generated KB of `kb_size` records otherwise.
    pub kb: Option<PathBuf>,
    pub kb_size: usize,
    pub kb_seed: u64,
    pub reward: RewardConfig,
    pub goals: GoalConfig,
    pub agent: AgentHyperParams,
    pub train: TrainConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            version: CONFIG_VERSION,
            seed: 0,
            ontology: None,
            kb: None,
            kb_size: 50,
            kb_seed: 7,
            reward: RewardConfig::default(),
            goals: GoalConfig::default(),
            agent: AgentHyperParams::default(),
            train: TrainConfig::default(),
        }
    }
}

impl Config {
    pub fn from_json(json: &str) -> Result<Self, ConfigError> {
        let c: Config = serde_json::from_str(json)?;
        if c.version != CONFIG_VERSION {
            return Err(ConfigError::Version { found: c.version });
        }
        c.reward.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        c.agent.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if c.kb.is_none() && c.kb_size == 0 {
            return Err(ConfigError::Invalid("kb_size must be positive".into()));
        }
        Ok(c)
    }

    /// Reads `path` if given, else defaults; then applies the environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut c = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Io {
                    path: p.display().to_string(),
                    source: e,
                })?;
                Self::from_json(&text)?
            }
            None => Config::default(),
        };
        c.apply_seed_override(std::env::var(SEED_ENV).ok().as_deref())?;
        Ok(c)
    }

    /// Replaces `seed` (and the training seed) with `value` when present.
    pub fn apply_seed_override(&mut self, value: Option<&str>) -> Result<(), ConfigError> {
        if let Some(v) = value.map(str::trim).filter(|v| !v.is_empty()) {
            let seed = v.parse().map_err(|_| ConfigError::SeedEnv(v.to_string()))?;
            self.seed = seed;
            self.train.seed = seed;
        }
        Ok(())
    }

    pub fn ontology(&self) -> Result<DomainOntology, ConfigError> {
        Ok(match &self.ontology {
            Some(p) => load_ontology(p)?,
            None => DomainOntology::bundled(),
        })
    }

    /// Ontology, KB, reward and goal settings assembled into an environment.
    pub fn env(&self) -> Result<DialogueEnv, ConfigError> {
        let ontology = self.ontology()?;
        let kb = match &self.kb {
            Some(p) => load_kb(p)?,
            None if self.kb_size == 50 && self.kb_seed == 7 => bundled_kb(&ontology),
            None => generate_kb(&ontology, self.kb_seed, self.kb_size)?,
        };
        let mut env = DialogueEnv::with_reward(ontology, kb, self.reward);
        env.goals = self.goals.clone();
        Ok(env)
    }
}
