//! Dialogue-manager harness: state tracking, state encoding, rewards,
//! episodes against the simulator, training and evaluation.

mod episode;
mod training;

pub use episode::{
    write_transcripts, DialogueEnv, Episode, EpisodeResult, GreedyPolicy, Policy, RandomPolicy, RulePolicy, Speaker,
    TranscriptTurn,
};
pub use training::{
    evaluate_episodes, evaluate_policy, evaluate_with, run_episode, summarize, train_dm, EvalStats, TrainConfig,
    TrainingReport, WindowStats,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentError;
use crate::ontology::{kb_query, DomainOntology, KbRecord, OntologyError, KB_FIELDS};
use crate::pipeline::frame::SemanticFrame;
use crate::simulator::{SimError, UserAction, DONTCARE};

#[derive(Debug, Error)]
pub enum DialogueError {
    #[error("agent expects {agent} inputs but the ontology encodes {encoder}")]
    DimensionMismatch { agent: usize, encoder: usize },
    #[error("agent has {agent} outputs but the action space has {space}")]
    ActionCount { agent: usize, space: usize },
    #[error("action index {0} out of range")]
    ActionOutOfRange(usize),
    #[error("episode already finished")]
    EpisodeOver,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Simulator(#[from] SimError),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "slot", rename_all = "snake_case")]
pub enum AgentAction {
    Greet,
    Request(String),
    Inform(String),
    MatchFound,
    Done,
}

impl fmt::Display for AgentAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentAction::Greet => f.write_str("greet"),
            AgentAction::Request(s) => write!(f, "request({s})"),
            AgentAction::Inform(s) => write!(f, "inform({s})"),
            AgentAction::MatchFound => f.write_str("match_found"),
            AgentAction::Done => f.write_str("done"),
        }
    }
}

impl AgentAction {
    /// System-side frame; `record` supplies values for offers and answers.
    pub fn to_frame(&self, record: Option<&KbRecord>) -> SemanticFrame {
        match (self, record) {
            (AgentAction::Greet, _) => SemanticFrame::new("greet"),
            (AgentAction::Request(s), _) => SemanticFrame::new("request").with_request(s.as_str()),
            (AgentAction::Inform(s), Some(r)) => match r.get(s) {
                Some(v) => SemanticFrame::new("inform").with_slot(s.as_str(), v),
                None => SemanticFrame::new("nooffer"),
            },
            (AgentAction::MatchFound, Some(r)) => SemanticFrame::new("recommend")
                .with_slot("name", r.name.as_str())
                .with_slot("area", r.area.as_str())
                .with_slot("food", r.food.as_str())
                .with_slot("pricerange", r.pricerange.as_str()),
            (AgentAction::Inform(_) | AgentAction::MatchFound, None) => SemanticFrame::new("nooffer"),
            (AgentAction::Done, _) => SemanticFrame::new("bye"),
        }
    }
}

/// Ordered agent action set: greet, one request per informable, one inform
/// per requestable, match_found, done.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSpace {
    actions: Vec<AgentAction>,
}

impl ActionSpace {
    pub fn from_ontology(ontology: &DomainOntology) -> Self {
        let mut actions = vec![AgentAction::Greet];
        actions.extend(ontology.informable_slots.iter().cloned().map(AgentAction::Request));
        actions.extend(ontology.requestable_slots.iter().cloned().map(AgentAction::Inform));
        actions.push(AgentAction::MatchFound);
        actions.push(AgentAction::Done);
        ActionSpace { actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&AgentAction> {
        self.actions.get(index)
    }

    pub fn index_of(&self, action: &AgentAction) -> Option<usize> {
        self.actions.iter().position(|a| a == action)
    }

    pub fn iter(&self) -> impl Iterator<Item = &AgentAction> {
        self.actions.iter()
    }
}

/// Tracker frame accumulated over a conversation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DialogueState {
    pub confirmed: BTreeMap<String, String>,
    /// Informables the user explicitly left open.
    pub dontcare: BTreeSet<String>,
    pub asked_by_user: BTreeSet<String>,
    pub answered: BTreeSet<String>,
    pub last_user: Option<UserAction>,
    pub last_agent: Option<AgentAction>,
    pub offered_record: Option<KbRecord>,
    /// Completed agent turns.
    pub turn: usize,
}

impl DialogueState {
    /// State after the user's opening utterance (no agent turn yet).
    pub fn opening(user: &UserAction) -> Self {
        let mut s = DialogueState::default();
        s.absorb(user);
        s
    }

    /// Merges a user action without advancing the turn counter.
    pub fn absorb(&mut self, user: &UserAction) {
        for (slot, value) in &user.inform {
            if value == DONTCARE {
                self.confirmed.remove(slot);
                self.dontcare.insert(slot.clone());
            } else {
                self.dontcare.remove(slot);
                self.confirmed.insert(slot.clone(), value.clone());
            }
        }
        self.asked_by_user.extend(user.request.iter().cloned());
        self.last_user = Some(user.clone());
    }

    /// Merges a user reply and advances the turn counter.
    pub fn update(&mut self, user: &UserAction) {
        self.absorb(user);
        self.turn += 1;
    }

    pub fn update_state(&self, user: &UserAction) -> DialogueState {
        let mut next = self.clone();
        next.update(user);
        next
    }

    /// Records what the agent did and which record it referred to.
    pub fn record_agent(&mut self, action: &AgentAction, record: Option<&KbRecord>) {
        match action {
            AgentAction::MatchFound => self.offered_record = record.cloned(),
            AgentAction::Inform(slot) if record.is_some() && self.asked_by_user.contains(slot) => {
                self.answered.insert(slot.clone());
            }
            _ => {}
        }
        self.last_agent = Some(action.clone());
    }

    /// Confirmed values restricted to knowledge-base fields.
    pub fn search_constraints(&self) -> BTreeMap<String, String> {
        self.confirmed
            .iter()
            .filter(|(k, _)| KB_FIELDS.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    /// First record satisfying the confirmed constraints.
    pub fn candidate<'a>(&self, kb: &'a [KbRecord]) -> Option<&'a KbRecord> {
        let constraints = self.search_constraints();
        kb.iter().find(|r| r.matches(&constraints).unwrap_or(false))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub per_turn: f64,
    pub success_bonus: f64,
    pub failure_penalty: f64,
    pub max_turns: usize,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig::for_max_turns(20)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Continue,
    Success,
    Failure,
}

impl RewardConfig {
    /// −1 per turn, +2·max_turns for success, −max_turns for failure.
    pub fn for_max_turns(max_turns: usize) -> Self {
        RewardConfig {
            per_turn: -1.0,
            success_bonus: 2.0 * max_turns as f64,
            failure_penalty: -(max_turns as f64),
            max_turns,
        }
    }

    pub fn validate(&self) -> Result<(), DialogueError> {
        if self.per_turn > 0.0 {
            return Err(DialogueError::Config("per_turn must be ≤ 0".into()));
        }
        if !(self.success_bonus > 0.0 && self.failure_penalty < 0.0) {
            return Err(DialogueError::Config("need success_bonus > 0 > failure_penalty".into()));
        }
        if self.max_turns == 0 {
            return Err(DialogueError::Config("max_turns must be at least 1".into()));
        }
        Ok(())
    }

    pub fn reward(&self, outcome: StepOutcome) -> f64 {
        match outcome {
            StepOutcome::Continue => self.per_turn,
            StepOutcome::Success => self.per_turn + self.success_bonus,
            StepOutcome::Failure => self.per_turn + self.failure_penalty,
        }
    }

    /// Closed form of an episode's return.
    pub fn episode_return(&self, turns: usize, success: bool) -> f64 {
        turns as f64 * self.per_turn + if success { self.success_bonus } else { self.failure_penalty }
    }
}

/// Fixed-length state features; the layout depends only on the ontology.
#[derive(Debug, Clone)]
pub struct StateEncoder {
    intents: Vec<String>,
    informables: Vec<String>,
    requestables: Vec<String>,
    actions: ActionSpace,
    max_turns: usize,
}

/// Match-count buckets: 0, 1, 2–5, more than 5.
pub const KB_BUCKETS: usize = 4;

pub fn kb_bucket(count: usize) -> usize {
    match count {
        0 => 0,
        1 => 1,
        2..=5 => 2,
        _ => 3,
    }
}

impl StateEncoder {
    pub fn new(ontology: &DomainOntology, max_turns: usize) -> Self {
        StateEncoder {
            intents: ontology.intents.clone(),
            informables: ontology.informable_slots.clone(),
            requestables: ontology.requestable_slots.clone(),
            actions: ActionSpace::from_ontology(ontology),
            max_turns: max_turns.max(1),
        }
    }

    /// |intents| + |informable| + 2·|requestable| + (|actions| + 1) + 4 + 1.
    pub fn dim(&self) -> usize {
        self.intents.len() + self.informables.len() + 2 * self.requestables.len() + self.actions.len() + 1 + KB_BUCKETS + 1
    }

    pub fn encode(&self, state: &DialogueState, kb: &[KbRecord]) -> Result<Vec<f64>, DialogueError> {
        let mut v = Vec::with_capacity(self.dim());
        let intent = state.last_user.as_ref().map(|u| u.intent.as_str());
        v.extend(self.intents.iter().map(|i| f64::from(Some(i.as_str()) == intent)));
        v.extend(
            self.informables
                .iter()
                .map(|s| f64::from(state.confirmed.contains_key(s) || state.dontcare.contains(s))),
        );
        v.extend(self.requestables.iter().map(|s| f64::from(state.asked_by_user.contains(s))));
        v.extend(self.requestables.iter().map(|s| f64::from(state.answered.contains(s))));
        let agent_idx = match &state.last_agent {
            Some(a) => self.actions.index_of(a).unwrap_or(self.actions.len()),
            None => self.actions.len(),
        };
        v.extend((0..=self.actions.len()).map(|i| f64::from(i == agent_idx)));
        let count = kb_query(kb, &state.search_constraints())?.len();
        let bucket = kb_bucket(count);
        v.extend((0..KB_BUCKETS).map(|i| f64::from(i == bucket)));
        v.push(state.turn.min(self.max_turns) as f64 / self.max_turns as f64);
        debug_assert_eq!(v.len(), self.dim());
        Ok(v)
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::bundled_kb;

    fn inform(pairs: &[(&str, &str)]) -> UserAction {
        let mut u = UserAction::new("inform");
        for (k, v) in pairs {
            u.inform.insert(k.to_string(), v.to_string());
        }
        u
    }

    #[test]
    fn update_merges_and_overwrites() {
        let s = DialogueState::default().update_state(&inform(&[("area", "north")]));
        assert_eq!(s.confirmed["area"], "north");
        assert_eq!(s.turn, 1);
        let s = s.update_state(&inform(&[("area", "south")]));
        assert_eq!(s.confirmed["area"], "south");
        let mut req = UserAction::new("request");
        req.request.insert("phone".into());
        let s = s.update_state(&req);
        assert!(s.asked_by_user.contains("phone"));
        assert!(s.answered.is_empty());
    }

    #[test]
    fn dontcare_moves_between_sets() {
        let mut s = DialogueState::opening(&inform(&[("food", "thai")]));
        s.update(&inform(&[("food", DONTCARE)]));
        assert!(!s.confirmed.contains_key("food"));
        assert!(s.dontcare.contains("food"));
        s.update(&inform(&[("food", "thai")]));
        assert!(s.dontcare.is_empty());
    }

    #[test]
    fn action_space_layout() {
        let o = DomainOntology::bundled();
        let space = ActionSpace::from_ontology(&o);
        assert_eq!(space.len(), 11);
        assert_eq!(space.get(0), Some(&AgentAction::Greet));
        assert_eq!(space.index_of(&AgentAction::Request("area".into())), Some(1));
        assert_eq!(space.index_of(&AgentAction::Done), Some(10));
    }

    #[test]
    fn encoding_dimension_formula() {
        let o = DomainOntology::bundled();
        let enc = StateEncoder::new(&o, 20);
        assert_eq!(enc.dim(), 13 + 4 + 2 * 4 + 12 + 4 + 1);
        assert_eq!(enc.dim(), 42);
    }

    #[test]
    fn empty_state_encoding() {
        let o = DomainOntology::bundled();
        let kb = bundled_kb(&o);
        let enc = StateEncoder::new(&o, 20);
        let v = enc.encode(&DialogueState::default(), &kb).unwrap();
        assert_eq!(v.len(), 42);
        // no user act yet, no flags, "no agent action" slot set, bucket >5
        assert_eq!(v[..25].iter().sum::<f64>(), 0.0);
        assert_eq!(v[25 + 11], 1.0);
        assert_eq!(&v[37..41], &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(v[41], 0.0);
    }

    #[test]
    fn unique_match_lands_in_bucket_one() {
        let o = DomainOntology::bundled();
        let kb = bundled_kb(&o);
        let enc = StateEncoder::new(&o, 20);
        let s = DialogueState::opening(&inform(&[("name", &kb[3].name)]));
        let v = enc.encode(&s, &kb).unwrap();
        assert_eq!(kb_query(&kb, &s.search_constraints()).unwrap().len(), 1);
        assert_eq!(&v[37..41], &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(v[o.intent_index("inform").unwrap()], 1.0);
    }

    #[test]
    fn reward_examples() {
        let r = RewardConfig::default();
        assert_eq!(r.episode_return(8, true), 32.0);
        assert_eq!(r.episode_return(20, false), -40.0);
        assert_eq!(r.reward(StepOutcome::Failure), -21.0);
        assert!(r.validate().is_ok());
        let bad = RewardConfig {
            per_turn: 1.0,
            ..r
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn agent_frames() {
        let o = DomainOntology::bundled();
        let kb = bundled_kb(&o);
        let rec = &kb[0];
        let f = AgentAction::Inform("phone".into()).to_frame(Some(rec));
        assert_eq!(f.slots["phone"], rec.phone);
        assert_eq!(AgentAction::MatchFound.to_frame(None).act, "nooffer");
        assert_eq!(AgentAction::MatchFound.to_frame(Some(rec)).slots.len(), 4);
        assert!(AgentAction::Request("area".into()).to_frame(None).requests.contains("area"));
        let json = serde_json::to_string(&AgentAction::Request("area".into())).unwrap();
        assert_eq!(json, r#"{"kind":"request","slot":"area"}"#);
    }
}
