//! DQN and DDQN dialogue-policy agents.
//!
//! Both variants keep an online and a target network. They differ only in how
//! the bootstrap value of the next state is formed in [`QAgent::compute_targets`]:
//! DQN takes `max_a Q_target(s', a)`, DDQN evaluates the online network's
//! argmax with the target network.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{Adam, AdamConfig, DenseNet, NetCheckpoint, NnError, Targets};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("replay buffer holds {have} transitions, batch needs {need}")]
    InsufficientBuffer { have: usize, need: usize },
    #[error("state has length {got}, agent expects {expected}")]
    StateDimension { expected: usize, got: usize },
    #[error("action {action} out of range for {n_actions} actions")]
    ActionOutOfRange { action: usize, n_actions: usize },
    #[error("invalid hyperparameters: {0}")]
    Hyper(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Dqn,
    Ddqn,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Dqn => "dqn",
            Variant::Ddqn => "ddqn",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dqn" => Ok(Variant::Dqn),
            "ddqn" => Ok(Variant::Ddqn),
            other => Err(format!("unknown algorithm `{other}` (expected dqn or ddqn)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentHyperParams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub hidden_size: usize,
    pub initial_epsilon: f64,
    pub final_epsilon: f64,
    /// Fraction of training episodes over which epsilon decays linearly.
    pub decay_fraction: f64,
    pub gamma: f64,
    /// Training episodes between target-network syncs.
    pub target_sync_interval: usize,
    pub buffer_capacity: usize,
    pub clip_norm: Option<f64>,
}

impl Default for AgentHyperParams {
    fn default() -> Self {
        AgentHyperParams {
            learning_rate: 1e-3,
            batch_size: 64,
            hidden_size: 80,
            initial_epsilon: 0.2,
            final_epsilon: 0.01,
            decay_fraction: 0.8,
            gamma: 0.9,
            target_sync_interval: 100,
            buffer_capacity: 50_000,
            clip_norm: Some(1.0),
        }
    }
}

impl AgentHyperParams {
    /// Best DQN configuration reported for the restaurant study.
    pub fn reported_dqn() -> Self {
        AgentHyperParams {
            learning_rate: 1.365e-3,
            batch_size: 256,
            hidden_size: 60,
            initial_epsilon: 0.10577,
            ..Default::default()
        }
    }

    /// Best DDQN configuration reported for the restaurant study.
    pub fn reported_ddqn() -> Self {
        AgentHyperParams {
            learning_rate: 5.1e-4,
            batch_size: 64,
            hidden_size: 100,
            initial_epsilon: 0.15678,
            ..Default::default()
        }
    }

    pub fn reported(variant: Variant) -> Self {
        match variant {
            Variant::Dqn => Self::reported_dqn(),
            Variant::Ddqn => Self::reported_ddqn(),
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let fail = |m: &str| Err(AgentError::Hyper(m.to_string()));
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return fail("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        if self.hidden_size < 2 {
            return fail("hidden_size must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.initial_epsilon) || !(0.0..=1.0).contains(&self.final_epsilon) {
            return fail("epsilon values must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail("gamma must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.decay_fraction) {
            return fail("decay_fraction must lie in [0, 1]");
        }
        if self.target_sync_interval == 0 {
            return fail("target_sync_interval must be at least 1");
        }
        if self.buffer_capacity < self.batch_size {
            return fail("buffer_capacity must hold at least one batch");
        }
        Ok(())
    }

    /// Exploration rate for a 0-based training episode.
    ///
    /// Linear from `initial_epsilon` to `final_epsilon` over the first
    /// `decay_fraction` of `total_episodes`, then flat. Never increases.
    pub fn epsilon_at(&self, episode: usize, total_episodes: usize) -> f64 {
        let floor = self.final_epsilon.min(self.initial_epsilon);
        let decay_episodes = (self.decay_fraction * total_episodes as f64).floor();
        if decay_episodes < 1.0 || episode as f64 >= decay_episodes {
            return floor;
        }
        let frac = episode as f64 / decay_episodes;
        self.initial_epsilon + (floor - self.initial_epsilon) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// FIFO ring of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity: capacity.max(1),
            storage: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.storage.len() == self.capacity {
            self.storage.pop_front();
        }
        self.storage.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }

    /// Uniform sample without replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<&Transition>, AgentError> {
        if self.storage.len() < batch {
            return Err(AgentError::InsufficientBuffer {
                have: self.storage.len(),
                need: batch,
            });
        }
        Ok(index::sample(rng, self.storage.len(), batch)
            .into_iter()
            .map(|i| &self.storage[i])
            .collect())
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct QAgent {
    variant: Variant,
    online: DenseNet,
    target: DenseNet,
    optimizer: Adam,
    buffer: ReplayBuffer,
    hyper: AgentHyperParams,
    epsilon: f64,
    episodes_trained: usize,
}

impl QAgent {
    pub fn new<R: Rng + ?Sized>(
        variant: Variant,
        input_dim: usize,
        n_actions: usize,
        hyper: AgentHyperParams,
        rng: &mut R,
    ) -> Result<Self, AgentError> {
        hyper.validate()?;
        let online = DenseNet::q_network(input_dim, hyper.hidden_size, n_actions, rng)?;
        Self::from_network(variant, online, hyper)
    }

    /// Wraps an existing network; the target starts as an exact copy.
    pub fn from_network(variant: Variant, online: DenseNet, hyper: AgentHyperParams) -> Result<Self, AgentError> {
        hyper.validate()?;
        let optimizer = Adam::new(
            &online,
            AdamConfig {
                learning_rate: hyper.learning_rate,
                clip_norm: hyper.clip_norm,
                ..Default::default()
            },
        )?;
        Ok(QAgent {
            variant,
            target: online.clone(),
            online,
            optimizer,
            buffer: ReplayBuffer::new(hyper.buffer_capacity),
            epsilon: hyper.initial_epsilon,
            hyper,
            episodes_trained: 0,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn hyper(&self) -> &AgentHyperParams {
        &self.hyper
    }

    pub fn online(&self) -> &DenseNet {
        &self.online
    }

    pub fn target(&self) -> &DenseNet {
        &self.target
    }

    /// Mutable access to the online network, for fixtures and warm starts.
    pub fn online_mut(&mut self) -> &mut DenseNet {
        &mut self.online
    }

    pub fn target_mut(&mut self) -> &mut DenseNet {
        &mut self.target
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn input_dim(&self) -> usize {
        self.online.input_dim()
    }

    pub fn n_actions(&self) -> usize {
        self.online.output_dim()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.epsilon = epsilon.clamp(0.0, 1.0);
    }

    pub fn episodes_trained(&self) -> usize {
        self.episodes_trained
    }

    pub fn optimizer_steps(&self) -> u64 {
        self.optimizer.step
    }

    fn check_state(&self, state: &[f64]) -> Result<(), AgentError> {
        if state.len() != self.input_dim() {
            return Err(AgentError::StateDimension {
                expected: self.input_dim(),
                got: state.len(),
            });
        }
        Ok(())
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>, AgentError> {
        self.check_state(state)?;
        Ok(self.online.forward(state)?)
    }

    pub fn greedy_action(&self, state: &[f64]) -> Result<usize, AgentError> {
        Ok(argmax(&self.q_values(state)?))
    }

    /// Epsilon-greedy choice at the agent's current epsilon.
    pub fn select_action<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Result<usize, AgentError> {
        self.check_state(state)?;
        if self.epsilon > 0.0 && rng.gen::<f64>() < self.epsilon {
            return Ok(rng.gen_range(0..self.n_actions()));
        }
        self.greedy_action(state)
    }

    pub fn remember(&mut self, t: Transition) -> Result<(), AgentError> {
        self.check_state(&t.state)?;
        self.check_state(&t.next_state)?;
        if t.action >= self.n_actions() {
            return Err(AgentError::ActionOutOfRange {
                action: t.action,
                n_actions: self.n_actions(),
            });
        }
        self.buffer.push(t);
        Ok(())
    }

    /// Bellman targets, one per transition.
    pub fn compute_targets(&self, batch: &[&Transition]) -> Result<Vec<f64>, AgentError> {
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        let dim = self.input_dim();
        let n = self.n_actions();
        let mut next = Vec::with_capacity(batch.len() * dim);
        for t in batch {
            self.check_state(&t.next_state)?;
            next.extend_from_slice(&t.next_state);
        }
        let target_q = self.target.forward_batch(&next, batch.len())?;
        let online_q = match self.variant {
            Variant::Ddqn => Some(self.online.forward_batch(&next, batch.len())?),
            Variant::Dqn => None,
        };
        let gamma = self.hyper.gamma;
        Ok(batch
            .iter()
            .enumerate()
            .map(|(b, t)| {
                if t.terminal {
                    return t.reward;
                }
                let row = &target_q[b * n..(b + 1) * n];
                let bootstrap = match &online_q {
                    None => row.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    Some(online) => row[argmax(&online[b * n..(b + 1) * n])],
                };
                t.reward + gamma * bootstrap
            })
            .collect())
    }

    /// One masked-MSE Adam step on a uniform minibatch; the target network is untouched.
    pub fn train_batch<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<f64, AgentError> {
        let batch_size = self.hyper.batch_size;
        let batch = self.buffer.sample(batch_size, rng)?;
        let targets = self.compute_targets(&batch)?;
        let mut states = Vec::with_capacity(batch_size * self.input_dim());
        let mut actions = Vec::with_capacity(batch_size);
        for t in &batch {
            states.extend_from_slice(&t.state);
            actions.push(t.action);
        }
        let (loss, grads) = self.online.loss_grad(
            &states,
            batch_size,
            Targets::Masked {
                actions: &actions,
                values: &targets,
            },
        )?;
        self.optimizer.step(&mut self.online, &grads)?;
        Ok(loss)
    }

    /// Copies the online parameters into the target network bit for bit.
    pub fn sync_target(&mut self) {
        self.target.copy_from(&self.online).expect("online and target share a topology");
    }

    /// Marks the end of a training episode; syncs the target on schedule.
    pub fn finish_episode(&mut self) {
        self.episodes_trained += 1;
        if self.episodes_trained.is_multiple_of(self.hyper.target_sync_interval) {
            self.sync_target();
        }
    }

    pub fn checkpoint(&self) -> AgentCheckpoint {
        AgentCheckpoint {
            version: crate::nn::CHECKPOINT_VERSION,
            variant: self.variant,
            hyper: self.hyper.clone(),
            epsilon: self.epsilon,
            episodes_trained: self.episodes_trained,
            online: NetCheckpoint::new(&self.online, Some(&self.optimizer)),
            target: NetCheckpoint::new(&self.target, None),
        }
    }

    pub fn from_checkpoint(ckpt: AgentCheckpoint) -> Result<Self, AgentError> {
        if ckpt.version != crate::nn::CHECKPOINT_VERSION {
            return Err(AgentError::Checkpoint(format!("unsupported version {}", ckpt.version)));
        }
        let (online, adam) = ckpt.online.restore()?;
        let (target, _) = ckpt.target.restore()?;
        if online.widths() != target.widths() {
            return Err(AgentError::Checkpoint("online and target topologies differ".into()));
        }
        let mut agent = QAgent::from_network(ckpt.variant, online, ckpt.hyper)?;
        agent.target = target;
        if let Some(adam) = adam {
            agent.optimizer = adam;
        }
        agent.epsilon = ckpt.epsilon;
        agent.episodes_trained = ckpt.episodes_trained;
        Ok(agent)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), AgentError> {
        let text = serde_json::to_string(&self.checkpoint()).map_err(|e| AgentError::Checkpoint(e.to_string()))?;
        std::fs::write(path.as_ref(), text).map_err(|e| AgentError::Checkpoint(format!("{}: {e}", path.as_ref().display())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AgentError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| AgentError::Checkpoint(format!("{}: {e}", path.as_ref().display())))?;
        let ckpt: AgentCheckpoint = serde_json::from_str(&text).map_err(|e| AgentError::Checkpoint(e.to_string()))?;
        Self::from_checkpoint(ckpt)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub version: u32,
    pub variant: Variant,
    pub hyper: AgentHyperParams,
    pub epsilon: f64,
    pub episodes_trained: usize,
    pub online: NetCheckpoint,
    pub target: NetCheckpoint,
}
