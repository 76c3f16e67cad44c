use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ActionSpace, AgentAction, DialogueError, DialogueState, RewardConfig, StateEncoder, StepOutcome};
use crate::agent::{QAgent, Transition};
use crate::ontology::{DomainOntology, KbRecord};
use crate::pipeline::frame::SemanticFrame;
use crate::simulator::{sample_goal_with, GoalConfig, SimulatorState, UserAction, UserGoal};

/// Everything an episode needs besides the policy: ontology, KB, rewards and
/// goal settings.
#[derive(Debug, Clone)]
pub struct DialogueEnv {
    pub ontology: DomainOntology,
    pub kb: Vec<KbRecord>,
    pub reward: RewardConfig,
    pub goals: GoalConfig,
    pub user_noise: f64,
    encoder: StateEncoder,
}

impl DialogueEnv {
    pub fn new(ontology: DomainOntology, kb: Vec<KbRecord>) -> Self {
        Self::with_reward(ontology, kb, RewardConfig::default())
    }

    pub fn with_reward(ontology: DomainOntology, kb: Vec<KbRecord>, reward: RewardConfig) -> Self {
        let encoder = StateEncoder::new(&ontology, reward.max_turns);
        DialogueEnv {
            ontology,
            kb,
            reward,
            goals: GoalConfig::default(),
            user_noise: 0.0,
            encoder,
        }
    }

    /// Bundled ontology with the bundled 50-record knowledge base.
    pub fn bundled() -> Self {
        let ontology = DomainOntology::bundled();
        let kb = crate::ontology::bundled_kb(&ontology);
        Self::new(ontology, kb)
    }

    pub fn encoder(&self) -> &StateEncoder {
        &self.encoder
    }

    pub fn actions(&self) -> &ActionSpace {
        self.encoder.actions()
    }

    pub fn state_dim(&self) -> usize {
        self.encoder.dim()
    }

    pub fn n_actions(&self) -> usize {
        self.actions().len()
    }

    pub fn encode(&self, state: &DialogueState) -> Result<Vec<f64>, DialogueError> {
        self.encoder.encode(state, &self.kb)
    }

    pub fn sample_goal<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<UserGoal, DialogueError> {
        Ok(sample_goal_with(&self.ontology, &self.kb, &self.goals, rng)?)
    }

    pub fn check_agent(&self, agent: &QAgent) -> Result<(), DialogueError> {
        if agent.input_dim() != self.state_dim() {
            return Err(DialogueError::DimensionMismatch {
                agent: agent.input_dim(),
                encoder: self.state_dim(),
            });
        }
        if agent.n_actions() != self.n_actions() {
            return Err(DialogueError::ActionCount {
                agent: agent.n_actions(),
                space: self.n_actions(),
            });
        }
        Ok(())
    }

    /// Runs one conversation under `policy` and returns its result.
    pub fn rollout<P: Policy + ?Sized, R: Rng + ?Sized>(
        &self,
        goal: UserGoal,
        policy: &mut P,
        rng: &mut R,
    ) -> Result<EpisodeResult, DialogueError> {
        let mut ep = Episode::start(self, goal, rng)?;
        while !ep.is_finished() {
            let a = policy.choose(ep.state(), ep.encoded())?;
            ep.step(a, rng)?;
        }
        Ok(ep.finish())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    Agent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptTurn {
    pub turn: usize,
    pub speaker: Speaker,
    pub frame: SemanticFrame,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    /// Agent turns taken.
    pub turns: usize,
    pub cumulative_reward: f64,
    pub goal: UserGoal,
    pub transcript: Vec<TranscriptTurn>,
}

/// Writes transcripts as JSON lines, one turn per line tagged with its episode.
pub fn write_transcripts<W: Write>(mut out: W, episodes: &[EpisodeResult]) -> Result<(), DialogueError> {
    #[derive(Serialize)]
    struct Line<'a> {
        episode: usize,
        #[serde(flatten)]
        turn: &'a TranscriptTurn,
    }
    for (episode, result) in episodes.iter().enumerate() {
        for turn in &result.transcript {
            let line = serde_json::to_string(&Line { episode, turn }).map_err(std::io::Error::other)?;
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}

/// A conversation in progress; drive it with [`Episode::step`].
#[derive(Debug)]
pub struct Episode<'e> {
    env: &'e DialogueEnv,
    sim: SimulatorState,
    state: DialogueState,
    encoded: Vec<f64>,
    transcript: Vec<TranscriptTurn>,
    cumulative: f64,
    outcome: Option<bool>,
}

impl<'e> Episode<'e> {
    pub fn start<R: Rng + ?Sized>(env: &'e DialogueEnv, goal: UserGoal, rng: &mut R) -> Result<Self, DialogueError> {
        let mut sim = SimulatorState::new(goal, &env.ontology).with_noise(env.user_noise);
        let opening = sim.opening(rng);
        let state = DialogueState::opening(&opening);
        let encoded = env.encode(&state)?;
        Ok(Episode {
            env,
            sim,
            transcript: vec![user_turn(0, &opening)],
            state,
            encoded,
            cumulative: 0.0,
            outcome: None,
        })
    }

    pub fn state(&self) -> &DialogueState {
        &self.state
    }

    pub fn encoded(&self) -> &[f64] {
        &self.encoded
    }

    pub fn simulator(&self) -> &SimulatorState {
        &self.sim
    }

    pub fn is_finished(&self) -> bool {
        self.outcome.is_some()
    }

    /// Plays one agent action and the user's reply.
    pub fn step<R: Rng + ?Sized>(&mut self, action_index: usize, rng: &mut R) -> Result<Transition, DialogueError> {
        if self.is_finished() {
            return Err(DialogueError::EpisodeOver);
        }
        let env = self.env;
        let action = env
            .actions()
            .get(action_index)
            .ok_or(DialogueError::ActionOutOfRange(action_index))?
            .clone();
        let record = match action {
            AgentAction::MatchFound => self.state.candidate(&env.kb).cloned(),
            AgentAction::Inform(_) => self.state.offered_record.clone(),
            _ => None,
        };
        self.state.record_agent(&action, record.as_ref());
        let turn = self.state.turn + 1;
        self.transcript.push(TranscriptTurn {
            turn,
            speaker: Speaker::Agent,
            frame: action.to_frame(record.as_ref()),
            utterance: None,
        });

        let reply = self.sim.respond(&action, record.as_ref(), rng);
        self.state.update(&reply);
        self.transcript.push(user_turn(turn, &reply));

        let terminal = reply.done || self.state.turn >= env.reward.max_turns;
        let outcome = if !terminal {
            StepOutcome::Continue
        } else if reply.done && self.sim.check_success(&self.state) {
            StepOutcome::Success
        } else {
            StepOutcome::Failure
        };
        let reward = env.reward.reward(outcome);
        self.cumulative += reward;
        if terminal {
            self.outcome = Some(outcome == StepOutcome::Success);
        }
        let next = env.encode(&self.state)?;
        let state = std::mem::replace(&mut self.encoded, next);
        Ok(Transition {
            state,
            action: action_index,
            reward,
            next_state: self.encoded.clone(),
            terminal,
        })
    }

    pub fn finish(self) -> EpisodeResult {
        EpisodeResult {
            success: self.outcome.unwrap_or(false),
            turns: self.state.turn,
            cumulative_reward: self.cumulative,
            goal: self.sim.goal.clone(),
            transcript: self.transcript,
        }
    }
}

fn user_turn(turn: usize, action: &UserAction) -> TranscriptTurn {
    TranscriptTurn {
        turn,
        speaker: Speaker::User,
        frame: action.to_frame(),
        utterance: None,
    }
}

/// Chooses an action index from the tracker state and its encoding.
pub trait Policy {
    fn choose(&mut self, state: &DialogueState, encoded: &[f64]) -> Result<usize, DialogueError>;
}

impl<F> Policy for F
where
    F: FnMut(&DialogueState, &[f64]) -> Result<usize, DialogueError>,
{
    fn choose(&mut self, state: &DialogueState, encoded: &[f64]) -> Result<usize, DialogueError> {
        self(state, encoded)
    }
}

/// Epsilon-free argmax over the agent's Q-values.
pub struct GreedyPolicy<'a>(pub &'a QAgent);

impl Policy for GreedyPolicy<'_> {
    fn choose(&mut self, _: &DialogueState, encoded: &[f64]) -> Result<usize, DialogueError> {
        Ok(self.0.greedy_action(encoded)?)
    }
}

/// Uniformly random actions.
pub struct RandomPolicy<R> {
    pub n_actions: usize,
    pub rng: R,
}

impl<R: Rng> Policy for RandomPolicy<R> {
    fn choose(&mut self, _: &DialogueState, _: &[f64]) -> Result<usize, DialogueError> {
        Ok(self.rng.gen_range(0..self.n_actions))
    }
}

/// Hand-written agent used for replay warm-up: ask for open informables in
/// ontology order, offer a match, answer requests, then finish.
#[derive(Debug, Clone)]
pub struct RulePolicy {
    actions: ActionSpace,
    informables: Vec<String>,
}

impl RulePolicy {
    pub fn new(ontology: &DomainOntology) -> Self {
        RulePolicy {
            actions: ActionSpace::from_ontology(ontology),
            informables: ontology.informable_slots.clone(),
        }
    }

    pub fn action(&self, state: &DialogueState) -> AgentAction {
        if let Some(slot) = self
            .informables
            .iter()
            .find(|s| !state.confirmed.contains_key(*s) && !state.dontcare.contains(*s))
        {
            return AgentAction::Request(slot.clone());
        }
        let constraints = state.search_constraints();
        let offer_ok = state
            .offered_record
            .as_ref()
            .is_some_and(|r| r.matches(&constraints).unwrap_or(false));
        if !offer_ok {
            return AgentAction::MatchFound;
        }
        match state.asked_by_user.difference(&state.answered).next() {
            Some(slot) => AgentAction::Inform(slot.clone()),
            None => AgentAction::Done,
        }
    }
}

impl Policy for RulePolicy {
    fn choose(&mut self, state: &DialogueState, _: &[f64]) -> Result<usize, DialogueError> {
        let action = self.action(state);
        self.actions
            .index_of(&action)
            .ok_or_else(|| DialogueError::Config(format!("rule action {action} not in action space")))
    }
}
