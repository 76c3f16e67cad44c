//! Interactive session: text → NLU → tracker → policy → NLG → text.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::protocol::{Generate, Understand};
use crate::dialogue::{AgentAction, DialogueEnv, DialogueError, DialogueState, Policy, Speaker, TranscriptTurn};
use crate::ontology::KbRecord;
use crate::simulator::{SimulatorState, UserAction, UserGoal};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatReply {
    pub text: String,
    pub finished: bool,
}

/// How far the session got on a goal set with `/goal`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalStatus {
    pub constraints_confirmed: bool,
    pub match_offered: bool,
    pub requests_answered: bool,
}

impl GoalStatus {
    pub fn complete(&self) -> bool {
        self.constraints_confirmed && self.match_offered && self.requests_answered
    }
}

/// Parses `/goal` arguments: `slot=value ... request=a,b`.
pub fn parse_goal(args: &str) -> Result<UserGoal, String> {
    let mut inform = BTreeMap::new();
    let mut request = BTreeSet::new();
    for part in args.split_whitespace() {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("expected slot=value, got `{part}`"))?;
        if k == "request" {
            request.extend(v.split(',').filter(|s| !s.is_empty()).map(str::to_string));
        } else {
            inform.insert(k.to_string(), v.to_string());
        }
    }
    if inform.is_empty() {
        return Err("a goal needs at least one constraint".into());
    }
    Ok(UserGoal {
        inform,
        request,
        book: None,
    })
}

pub struct ChatSession<'a> {
    env: &'a DialogueEnv,
    policy: Box<dyn Policy + 'a>,
    nlu: Box<dyn Understand + 'a>,
    nlg: Box<dyn Generate + 'a>,
    state: DialogueState,
    started: bool,
    finished: bool,
    goal: Option<UserGoal>,
    last: Option<(AgentAction, Option<KbRecord>)>,
    transcript: Vec<TranscriptTurn>,
}

impl<'a> ChatSession<'a> {
    pub fn new(
        env: &'a DialogueEnv,
        policy: Box<dyn Policy + 'a>,
        nlu: Box<dyn Understand + 'a>,
        nlg: Box<dyn Generate + 'a>,
    ) -> Self {
        ChatSession {
            env,
            policy,
            nlu,
            nlg,
            state: DialogueState::default(),
            started: false,
            finished: false,
            goal: None,
            last: None,
            transcript: Vec::new(),
        }
    }

    pub fn state(&self) -> &DialogueState {
        &self.state
    }

    pub fn transcript(&self) -> &[TranscriptTurn] {
        &self.transcript
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn goal(&self) -> Option<&UserGoal> {
        self.goal.as_ref()
    }

    pub fn set_goal(&mut self, goal: UserGoal) {
        self.goal = Some(goal);
    }

    /// Last agent action and the record it referred to.
    pub fn last_action(&self) -> Option<&(AgentAction, Option<KbRecord>)> {
        self.last.as_ref()
    }

    pub fn reset(&mut self) {
        self.state = DialogueState::default();
        self.started = false;
        self.finished = false;
        self.last = None;
        self.transcript.clear();
    }

    pub fn goal_status(&self) -> Option<GoalStatus> {
        let goal = self.goal.as_ref()?;
        let offered = self.state.offered_record.as_ref();
        Some(GoalStatus {
            constraints_confirmed: goal.constraints().iter().all(|(k, v)| self.state.confirmed.get(k) == Some(v)),
            match_offered: offered.is_some_and(|r| r.matches(&goal.inform).unwrap_or(false)),
            requests_answered: goal.request.is_subset(&self.state.answered),
        })
    }

    fn describe_state(&self) -> String {
        let join = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(",");
        let confirmed: Vec<String> = self.state.confirmed.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!(
            "confirmed [{}] dontcare [{}] asked [{}] answered [{}] offered [{}] turn {}",
            confirmed.join(", "),
            join(&self.state.dontcare),
            join(&self.state.asked_by_user),
            join(&self.state.answered),
            self.state.offered_record.as_ref().map_or("-", |r| r.name.as_str()),
            self.state.turn
        )
    }

    fn meta(&mut self, line: &str) -> ChatReply {
        let (cmd, args) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let text = match cmd {
            "/quit" => {
                self.finished = true;
                return ChatReply {
                    text: "goodbye".into(),
                    finished: true,
                };
            }
            "/state" => self.describe_state(),
            "/reset" => {
                self.reset();
                "new conversation".into()
            }
            "/goal" if args.trim().is_empty() => match (&self.goal, self.goal_status()) {
                (Some(g), Some(s)) => format!("goal {:?} request {:?}: {s:?}", g.inform, g.request),
                _ => "no goal set".into(),
            },
            "/goal" => match parse_goal(args) {
                Ok(g) => {
                    let feasible = g.is_feasible(&self.env.kb);
                    self.goal = Some(g);
                    format!("goal set ({})", if feasible { "feasible" } else { "no matching venue" })
                }
                Err(e) => format!("bad goal: {e}"),
            },
            other => format!("unknown command {other}; try /goal, /state, /reset or /quit"),
        };
        ChatReply { text, finished: false }
    }

    fn log(&mut self, speaker: Speaker, frame: crate::SemanticFrame, utterance: &str) {
        self.transcript.push(TranscriptTurn {
            turn: self.state.turn,
            speaker,
            frame,
            utterance: Some(utterance.to_string()),
        });
    }

    /// Handles one input line and always returns exactly one reply.
    pub fn handle(&mut self, line: &str) -> Result<ChatReply, DialogueError> {
        let line = line.trim();
        if line.starts_with('/') {
            return Ok(self.meta(line));
        }
        if self.finished {
            return Ok(ChatReply {
                text: "this conversation has ended ; use /reset or /quit".into(),
                finished: true,
            });
        }
        let frame = self.nlu.understand(line);
        let user = UserAction::from_frame(&frame);
        if self.started {
            self.state.update(&user);
        } else {
            self.state.absorb(&user);
            self.started = true;
        }
        self.log(Speaker::User, frame, line);

        let action = if user.done {
            AgentAction::Done
        } else {
            let encoded = self.env.encode(&self.state)?;
            let idx = self.policy.choose(&self.state, &encoded)?;
            self.env
                .actions()
                .get(idx)
                .ok_or(DialogueError::ActionOutOfRange(idx))?
                .clone()
        };
        let record = match action {
            AgentAction::MatchFound => self.state.candidate(&self.env.kb).cloned(),
            AgentAction::Inform(_) => self.state.offered_record.clone(),
            _ => None,
        };
        self.state.record_agent(&action, record.as_ref());
        let out_frame = action.to_frame(record.as_ref());
        let text = self.nlg.generate(std::slice::from_ref(&out_frame));
        self.transcript.push(TranscriptTurn {
            turn: self.state.turn + 1,
            speaker: Speaker::Agent,
            frame: out_frame,
            utterance: Some(text.clone()),
        });
        self.finished = user.done || action == AgentAction::Done || self.state.turn + 1 >= self.env.reward.max_turns;
        self.last = Some((action, record));
        Ok(ChatReply {
            text,
            finished: self.finished,
        })
    }
}

/// Drives a session with the user simulator voiced through `user_nlg`:
/// each simulated user act is realised as text and fed to the session.
/// Returns the agent replies in order.
pub fn run_scripted<R: Rng + ?Sized>(
    session: &mut ChatSession<'_>,
    goal: UserGoal,
    user_nlg: &mut dyn Generate,
    rng: &mut R,
) -> Result<Vec<ChatReply>, DialogueError> {
    let mut sim = SimulatorState::new(goal.clone(), &session.env.ontology);
    session.set_goal(goal);
    let mut replies = Vec::new();
    let mut user = sim.opening(rng);
    loop {
        let text = user_nlg.generate(&[user.to_frame()]);
        let reply = session.handle(&text)?;
        let finished = reply.finished;
        replies.push(reply);
        if finished {
            break;
        }
        let (action, record) = session.last_action().cloned().expect("an agent turn was taken");
        user = sim.respond(&action, record.as_ref(), rng);
    }
    Ok(replies)
}
