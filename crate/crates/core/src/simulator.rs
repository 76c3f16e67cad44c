//! Agenda-based user simulator.
//!
//! The user holds a [`UserGoal`] and answers each agent action with a
//! [`UserAction`] according to a fixed decision table:
//!
//! | agent action            | condition                          | user reply                                   |
//! |-------------------------|------------------------------------|----------------------------------------------|
//! | `request(s)`            | `s` is a goal constraint           | inform `s`                                   |
//! | `request(s)`            | `s` is not a goal constraint       | inform all untold constraints, `dontcare` for the other informables |
//! | `match_found`           | no record offered                  | restate every constraint                     |
//! | `match_found`           | record violates a constraint       | re-inform the first violated slot            |
//! | `match_found`           | record satisfies the goal          | accept; request the next open slot, or bye   |
//! | `inform(s)`             | a record was accepted              | note the answer, then the default reply      |
//! | `done`                  | any                                | bye (conversation over)                      |
//! | anything else           | any                                | default reply                                |
//!
//! The default reply informs the next untold constraint; failing that, with an
//! accepted record it requests the next open slot or says bye; otherwise it
//! restates the constraints.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialogue::{AgentAction, DialogueState};
use crate::ontology::{kb_query, DomainOntology, KbRecord};
use crate::pipeline::frame::SemanticFrame;

/// Value a user gives for an informable slot they have no preference on.
pub const DONTCARE: &str = "dontcare";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("cannot sample a goal from an empty knowledge base")]
    EmptyKb,
    #[error("ontology has no informable slot present in the knowledge base")]
    NoInformables,
    #[error("could not construct an infeasible goal after {0} attempts")]
    NoInfeasibleGoal(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserGoal {
    pub inform: BTreeMap<String, String>,
    #[serde(default)]
    pub request: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub book: Option<BTreeMap<String, String>>,
}

impl UserGoal {
    /// Everything the user will state: inform constraints plus booking details.
    pub fn constraints(&self) -> BTreeMap<String, String> {
        let mut all = self.inform.clone();
        if let Some(book) = &self.book {
            all.extend(book.iter().map(|(k, v)| (k.clone(), v.clone())));
        }
        all
    }

    pub fn is_feasible(&self, kb: &[KbRecord]) -> bool {
        kb_query(kb, &self.inform).map(|r| !r.is_empty()).unwrap_or(false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GoalConfig {
    pub max_inform: usize,
    pub max_request: usize,
    /// Adds day/people/time booking details to every goal.
    pub with_book: bool,
    /// Samples goals that no record satisfies.
    pub infeasible: bool,
}

impl Default for GoalConfig {
    fn default() -> Self {
        GoalConfig {
            max_inform: 3,
            max_request: 3,
            with_book: false,
            infeasible: false,
        }
    }
}

fn goal_informables<'a>(ontology: &'a DomainOntology, kb: &[KbRecord]) -> Vec<&'a String> {
    ontology
        .informable_slots
        .iter()
        .filter(|s| kb[0].get(s).is_some())
        .collect()
}

pub fn sample_goal<R: Rng + ?Sized>(ontology: &DomainOntology, kb: &[KbRecord], rng: &mut R) -> Result<UserGoal, SimError> {
    sample_goal_with(ontology, kb, &GoalConfig::default(), rng)
}

/// Picks a record uniformly and builds a goal it satisfies, unless
/// `config.infeasible` asks for the opposite.
pub fn sample_goal_with<R: Rng + ?Sized>(
    ontology: &DomainOntology,
    kb: &[KbRecord],
    config: &GoalConfig,
    rng: &mut R,
) -> Result<UserGoal, SimError> {
    if kb.is_empty() {
        return Err(SimError::EmptyKb);
    }
    let informables = goal_informables(ontology, kb);
    if informables.is_empty() {
        return Err(SimError::NoInformables);
    }
    let max_inform = config.max_inform.clamp(1, informables.len());
    let record = &kb[rng.gen_range(0..kb.len())];
    let k = rng.gen_range(1..=max_inform);
    let mut inform: BTreeMap<String, String> = informables
        .choose_multiple(rng, k)
        .map(|s| ((*s).clone(), record.get(s).unwrap_or_default().to_string()))
        .collect();

    if config.infeasible {
        inform = infeasible_constraints(ontology, kb, &informables, max_inform, rng)?;
    }

    let candidates: Vec<&String> = ontology
        .requestable_slots
        .iter()
        .filter(|s| !inform.contains_key(*s) && record.get(s).is_some())
        .collect();
    let m = rng.gen_range(0..=config.max_request.min(candidates.len()));
    let request = candidates.choose_multiple(rng, m).map(|s| (*s).clone()).collect();

    let book = config.with_book.then(|| {
        ontology
            .book_slots
            .iter()
            .filter_map(|s| ontology.values(s).choose(rng).map(|v| (s.clone(), v.clone())))
            .collect()
    });
    Ok(UserGoal { inform, request, book })
}

fn infeasible_constraints<R: Rng + ?Sized>(
    ontology: &DomainOntology,
    kb: &[KbRecord],
    informables: &[&String],
    max_inform: usize,
    rng: &mut R,
) -> Result<BTreeMap<String, String>, SimError> {
    const ATTEMPTS: usize = 1000;
    for _ in 0..ATTEMPTS {
        let k = rng.gen_range(1..=max_inform);
        let inform: BTreeMap<String, String> = informables
            .choose_multiple(rng, k)
            .filter_map(|s| ontology.values(s).choose(rng).map(|v| ((*s).clone(), v.clone())))
            .collect();
        if !inform.is_empty() && kb_query(kb, &inform).map(|r| r.is_empty()).unwrap_or(false) {
            return Ok(inform);
        }
    }
    Err(SimError::NoInfeasibleGoal(ATTEMPTS))
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UserAction {
    pub intent: String,
    #[serde(default)]
    pub inform: BTreeMap<String, String>,
    #[serde(default)]
    pub request: BTreeSet<String>,
    #[serde(default)]
    pub done: bool,
}

impl UserAction {
    pub fn new(intent: impl Into<String>) -> Self {
        UserAction {
            intent: intent.into(),
            ..Default::default()
        }
    }

    pub fn to_frame(&self) -> SemanticFrame {
        SemanticFrame {
            act: self.intent.clone(),
            slots: self.inform.clone(),
            requests: self.request.clone(),
        }
    }

    /// Reads a frame produced by NLU as a user action; `bye` ends the conversation.
    pub fn from_frame(frame: &SemanticFrame) -> Self {
        UserAction {
            intent: frame.act.clone(),
            inform: frame.slots.clone(),
            request: frame.requests.clone(),
            done: frame.act == "bye",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatorState {
    pub goal: UserGoal,
    pub pending_informs: VecDeque<String>,
    pub pending_requests: BTreeSet<String>,
    pub received: BTreeMap<String, String>,
    pub offered_record: Option<KbRecord>,
    /// Whether the last offered record was accepted.
    pub accepted: bool,
    /// Probability of replacing each stated value with a different lexicon value.
    pub noise: f64,
    informables: Vec<String>,
    lexicon: BTreeMap<String, Vec<String>>,
}

impl SimulatorState {
    pub fn new(goal: UserGoal, ontology: &DomainOntology) -> Self {
        let lexicon = goal
            .constraints()
            .keys()
            .map(|s| (s.clone(), ontology.values(s).to_vec()))
            .collect();
        SimulatorState {
            pending_informs: goal.inform.keys().cloned().collect(),
            pending_requests: goal.request.clone(),
            received: BTreeMap::new(),
            offered_record: None,
            accepted: false,
            noise: 0.0,
            informables: ontology.informable_slots.clone(),
            lexicon,
            goal,
        }
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise.clamp(0.0, 1.0);
        self
    }

    fn value_for<R: Rng + ?Sized>(&self, slot: &str, rng: &mut R) -> String {
        let truth = self.goal.constraints().get(slot).cloned().unwrap_or_default();
        if self.noise > 0.0 && rng.gen::<f64>() < self.noise {
            let others: Vec<&String> = self.lexicon.get(slot).into_iter().flatten().filter(|v| **v != truth).collect();
            if let Some(v) = others.choose(rng) {
                return (*v).clone();
            }
        }
        truth
    }

    fn inform_slots<R: Rng + ?Sized>(&self, slots: &[String], rng: &mut R) -> UserAction {
        let mut action = UserAction::new("inform");
        for s in slots {
            let value = self.value_for(s, rng);
            action.inform.insert(s.clone(), value);
        }
        action
    }

    fn restate_all<R: Rng + ?Sized>(&mut self, rng: &mut R) -> UserAction {
        self.pending_informs.clear();
        let slots: Vec<String> = self.goal.constraints().into_keys().collect();
        self.inform_slots(&slots, rng)
    }

    /// Opening utterance: the first constraint plus any booking details.
    pub fn opening<R: Rng + ?Sized>(&mut self, rng: &mut R) -> UserAction {
        let mut slots: Vec<String> = self.pending_informs.pop_front().into_iter().collect();
        if let Some(book) = &self.goal.book {
            slots.extend(book.keys().cloned());
        }
        self.inform_slots(&slots, rng)
    }

    fn after_acceptance(&self) -> UserAction {
        match self.pending_requests.iter().next() {
            Some(slot) => {
                let mut a = UserAction::new("request");
                a.request.insert(slot.clone());
                a
            }
            None => UserAction {
                done: true,
                ..UserAction::new("bye")
            },
        }
    }

    fn default_reply<R: Rng + ?Sized>(&mut self, rng: &mut R) -> UserAction {
        if let Some(slot) = self.pending_informs.pop_front() {
            return self.inform_slots(&[slot], rng);
        }
        if self.accepted {
            return self.after_acceptance();
        }
        self.restate_all(rng)
    }

    /// Answers one agent action. `offered` is the record the agent's action
    /// refers to (the candidate for `match_found`, the offered one for `inform`).
    pub fn respond<R: Rng + ?Sized>(&mut self, action: &AgentAction, offered: Option<&KbRecord>, rng: &mut R) -> UserAction {
        match action {
            AgentAction::Request(slot) if self.goal.inform.contains_key(slot) => {
                self.pending_informs.retain(|s| s != slot);
                self.inform_slots(std::slice::from_ref(slot), rng)
            }
            AgentAction::Request(slot) if self.informables.contains(slot) => {
                let slots: Vec<String> = self.pending_informs.drain(..).collect();
                let mut reply = self.inform_slots(&slots, rng);
                for s in &self.informables {
                    if !self.goal.inform.contains_key(s) {
                        reply.inform.insert(s.clone(), DONTCARE.to_string());
                    }
                }
                reply
            }
            AgentAction::MatchFound => {
                self.offered_record = offered.cloned();
                self.accepted = false;
                let Some(record) = offered else {
                    return self.restate_all(rng);
                };
                let violated = self
                    .goal
                    .inform
                    .iter()
                    .find(|(slot, value)| record.get(slot).map(|v| !v.eq_ignore_ascii_case(value)).unwrap_or(true))
                    .map(|(slot, _)| slot.clone());
                match violated {
                    Some(slot) => self.inform_slots(&[slot], rng),
                    None => {
                        self.accepted = true;
                        self.received.insert("name".into(), record.name.clone());
                        self.after_acceptance()
                    }
                }
            }
            AgentAction::Inform(slot) => {
                if self.accepted && self.pending_requests.contains(slot) {
                    if let Some(value) = offered.and_then(|r| r.get(slot)) {
                        self.received.insert(slot.clone(), value.to_string());
                        self.pending_requests.remove(slot);
                    }
                }
                self.default_reply(rng)
            }
            AgentAction::Done => UserAction {
                done: true,
                ..UserAction::new("bye")
            },
            AgentAction::Greet | AgentAction::Request(_) => self.default_reply(rng),
        }
    }

    /// Final adjudication of a finished conversation.
    pub fn check_success(&self, tracker: &DialogueState) -> bool {
        if tracker.confirmed != self.goal.constraints() {
            return false;
        }
        let Some(record) = self.offered_record.as_ref().filter(|_| self.accepted) else {
            return false;
        };
        if !record.matches(&self.goal.inform).unwrap_or(false) {
            return false;
        }
        self.goal
            .request
            .iter()
            .all(|s| self.received.get(s).map(String::as_str) == record.get(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::bundled_kb;

    fn setup() -> (DomainOntology, Vec<KbRecord>) {
        let o = DomainOntology::bundled();
        let kb = bundled_kb(&o);
        (o, kb)
    }

    fn goal(inform: &[(&str, &str)], request: &[&str]) -> UserGoal {
        UserGoal {
            inform: inform.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            request: request.iter().map(|s| s.to_string()).collect(),
            book: None,
        }
    }

    fn rng() -> crate::SeededRng {
        crate::stream_rng(3, 0)
    }

    #[test]
    fn sampled_goals_are_feasible_and_seeded() {
        let (o, kb) = setup();
        for seed in 0..200 {
            let g = sample_goal(&o, &kb, &mut crate::stream_rng(seed, 0)).unwrap();
            assert!((1..=3).contains(&g.inform.len()));
            assert!(g.request.len() <= 3);
            assert!(!kb_query(&kb, &g.inform).unwrap().is_empty());
            for (s, v) in &g.inform {
                assert!(o.values(s).contains(v), "{s}={v}");
            }
            assert_eq!(g, sample_goal(&o, &kb, &mut crate::stream_rng(seed, 0)).unwrap());
        }
    }

    #[test]
    fn infeasible_mode_matches_nothing() {
        let (o, kb) = setup();
        let cfg = GoalConfig {
            infeasible: true,
            ..Default::default()
        };
        for seed in 0..20 {
            let g = sample_goal_with(&o, &kb, &cfg, &mut crate::stream_rng(seed, 0)).unwrap();
            assert!(!g.is_feasible(&kb));
        }
    }

    #[test]
    fn empty_kb_is_an_error() {
        let (o, _) = setup();
        assert!(matches!(sample_goal(&o, &[], &mut rng()), Err(SimError::EmptyKb)));
    }

    #[test]
    fn full_request_goal_initialises_pending() {
        let (o, _) = setup();
        let g = goal(&[("area", "north")], &["address", "food", "phone", "postcode"]);
        let sim = SimulatorState::new(g.clone(), &o);
        assert_eq!(sim.pending_requests, g.request);
    }

    #[test]
    fn request_for_goal_slot_is_answered() {
        let (o, _) = setup();
        let mut sim = SimulatorState::new(goal(&[("area", "north"), ("food", "thai")], &[]), &o);
        let reply = sim.respond(&AgentAction::Request("area".into()), None, &mut rng());
        assert_eq!(reply.intent, "inform");
        assert_eq!(reply.inform, BTreeMap::from([("area".to_string(), "north".to_string())]));
    }

    #[test]
    fn request_for_other_slot_reveals_everything() {
        let (o, _) = setup();
        let mut sim = SimulatorState::new(goal(&[("area", "north"), ("food", "thai")], &[]), &o);
        let reply = sim.respond(&AgentAction::Request("name".into()), None, &mut rng());
        assert_eq!(reply.inform["area"], "north");
        assert_eq!(reply.inform["food"], "thai");
        assert_eq!(reply.inform["name"], DONTCARE);
        assert_eq!(reply.inform["pricerange"], DONTCARE);
        assert!(sim.pending_informs.is_empty());
    }

    #[test]
    fn violating_offer_reinforms_the_slot() {
        let (o, kb) = setup();
        let bad = kb.iter().find(|r| r.pricerange != "cheap").unwrap();
        let mut sim = SimulatorState::new(goal(&[("pricerange", "cheap")], &[]), &o);
        let reply = sim.respond(&AgentAction::MatchFound, Some(bad), &mut rng());
        assert_eq!(reply.intent, "inform");
        assert_eq!(reply.inform, BTreeMap::from([("pricerange".to_string(), "cheap".to_string())]));
        assert!(!sim.accepted);
    }

    #[test]
    fn consistent_offer_then_answers_then_bye() {
        let (o, kb) = setup();
        let rec = &kb[0];
        let mut sim = SimulatorState::new(goal(&[("area", &rec.area)], &["phone"]), &o);
        let mut r = rng();
        sim.opening(&mut r);
        let reply = sim.respond(&AgentAction::MatchFound, Some(rec), &mut r);
        assert_eq!(reply.intent, "request");
        assert!(reply.request.contains("phone"));
        let reply = sim.respond(&AgentAction::Inform("phone".into()), Some(rec), &mut r);
        assert_eq!(reply.intent, "bye");
        assert!(reply.done);
        assert_eq!(sim.received["phone"], rec.phone);
        assert!(sim.pending_requests.is_empty());
    }

    #[test]
    fn done_ends_the_conversation() {
        let (o, _) = setup();
        let mut sim = SimulatorState::new(goal(&[("area", "north")], &[]), &o);
        let reply = sim.respond(&AgentAction::Done, None, &mut rng());
        assert!(reply.done);
        assert_eq!(reply.intent, "bye");
    }

    #[test]
    fn success_requires_all_three_conditions() {
        let (o, kb) = setup();
        let rec = &kb[0];
        let g = goal(&[("area", &rec.area), ("food", &rec.food)], &["phone"]);
        let mut sim = SimulatorState::new(g.clone(), &o);
        let mut r = rng();
        sim.respond(&AgentAction::MatchFound, Some(rec), &mut r);
        let tracker = DialogueState {
            confirmed: g.inform.clone(),
            ..Default::default()
        };
        assert!(!sim.check_success(&tracker), "phone not yet answered");
        sim.respond(&AgentAction::Inform("phone".into()), Some(rec), &mut r);
        assert!(sim.check_success(&tracker));

        let mut partial = tracker.clone();
        partial.confirmed.remove("food");
        assert!(!sim.check_success(&partial));

        let wrong = kb.iter().find(|x| x.area != rec.area).unwrap();
        let mut other = SimulatorState::new(g, &o);
        other.respond(&AgentAction::MatchFound, Some(wrong), &mut r);
        other.received.insert("phone".into(), wrong.phone.clone());
        assert!(!other.check_success(&tracker));
    }

    #[test]
    fn noise_corrupts_values() {
        let (o, _) = setup();
        let g = goal(&[("area", "north")], &[]);
        let mut changed = 0;
        for i in 0..200 {
            let mut sim = SimulatorState::new(g.clone(), &o).with_noise(0.5);
            let a = sim.opening(&mut crate::stream_rng(i, 9));
            if a.inform["area"] != "north" {
                changed += 1;
            }
        }
        assert!((60..140).contains(&changed), "{changed}");
    }
}
