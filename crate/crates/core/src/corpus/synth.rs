//! Synthetic MultiWOZ-style corpus for offline runs.
//!
//! Restaurant conversations come from the user simulator talking to the rule
//! agent; both sides are surfaced through the bundled templates and annotated
//! with domain-prefixed act types and character spans, the way the public
//! corpus is. A share of hotel-only and restaurant+hotel dialogues exercises
//! the domain filter.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, DialogueAct, RawDialogue, SpanInfo, Turn};
use crate::dialogue::{DialogueEnv, RulePolicy, Speaker};
use crate::pipeline::frame::SemanticFrame;
use crate::pipeline::templates::TemplateSet;
use crate::simulator::DONTCARE;
use crate::{mix_seed, stream_rng};

const SYNTH_STREAM: u64 = 0x5e;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub dialogues: usize,
    pub seed: u64,
    pub hotel_fraction: f64,
    pub multi_domain_fraction: f64,
    /// Chance of voicing `moderate` as "moderately priced".
    pub synonym_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            dialogues: 200,
            seed: 0,
            hotel_fraction: 0.1,
            multi_domain_fraction: 0.1,
            synonym_rate: 0.3,
        }
    }
}

const HOTEL_AREAS: [&str; 5] = ["centre", "north", "south", "east", "west"];

/// Corpus-style act name for a frame act.
fn act_type(act: &str) -> String {
    match act {
        "greet" | "bye" | "thank" | "welcome" | "reqmore" => format!("general-{act}"),
        "nooffer" => "Restaurant-NoOffer".into(),
        "offerbook" => "OfferBook".into(),
        "nobook" => "NoBook".into(),
        other => {
            let mut c = other.chars();
            let head: String = c.next().map(|h| h.to_uppercase().collect()).unwrap_or_default();
            format!("Restaurant-{head}{}", c.as_str())
        }
    }
}

/// Booking slots are written with their corpus prefix (`bookday`, ...).
fn corpus_slot(slot: &str) -> String {
    match slot {
        "day" | "people" | "time" => format!("book{slot}"),
        other => other.to_string(),
    }
}

fn frame_acts(frame: &SemanticFrame) -> Vec<DialogueAct> {
    let mut acts = Vec::new();
    if !frame.slots.is_empty() || frame.requests.is_empty() {
        let act = if frame.act == "request" { "inform" } else { frame.act.as_str() };
        acts.push(DialogueAct {
            act_type: act_type(act),
            slots: frame.slots.iter().map(|(k, v)| (corpus_slot(k), v.clone())).collect(),
        });
    }
    if !frame.requests.is_empty() {
        acts.push(DialogueAct {
            act_type: act_type("request"),
            slots: frame.requests.iter().map(|r| (corpus_slot(r), "?".to_string())).collect(),
        });
    }
    acts
}

fn char_span(text: &str, needle: &str) -> Option<(usize, usize)> {
    let byte = text.find(needle)?;
    let start = text[..byte].chars().count();
    Some((start, start + needle.chars().count()))
}

fn surface_turn<R: Rng + ?Sized>(
    speaker: u8,
    frame: &SemanticFrame,
    templates: &TemplateSet,
    synonym_rate: f64,
    rng: &mut R,
) -> Turn {
    let mut utterance = templates.realize(frame);
    let acts = frame_acts(frame);
    let mut spans = Vec::new();
    for act in &acts {
        for (slot, value) in &act.slots {
            if value == "?" || value == DONTCARE {
                continue;
            }
            let mut surface = value.clone();
            if speaker == 0 && slot == "pricerange" && value == "moderate" && rng.gen_bool(synonym_rate) {
                utterance = utterance.replacen("moderate", "moderately priced", 1);
                surface = "moderately priced".into();
            }
            if let Some((start, end)) = char_span(&utterance, &surface) {
                spans.push(SpanInfo {
                    act_type: act.act_type.clone(),
                    slot: slot.clone(),
                    value: value.clone(),
                    start,
                    end,
                });
            }
        }
    }
    Turn {
        speaker,
        utterance,
        dialogue_acts: acts,
        span_info: spans,
    }
}

fn plain_turn(speaker: u8, utterance: String, act: &str, slots: &[(&str, &str)]) -> Turn {
    let slots: BTreeMap<String, String> = slots.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    let span_info = slots
        .iter()
        .filter(|(_, v)| *v != "?")
        .filter_map(|(k, v)| {
            char_span(&utterance, v).map(|(start, end)| SpanInfo {
                act_type: act.to_string(),
                slot: k.clone(),
                value: v.clone(),
                start,
                end,
            })
        })
        .collect();
    Turn {
        speaker,
        utterance,
        dialogue_acts: vec![DialogueAct {
            act_type: act.to_string(),
            slots,
        }],
        span_info,
    }
}

fn hotel_exchange<R: Rng + ?Sized>(rng: &mut R, follow_up: bool) -> Vec<Turn> {
    let area = HOTEL_AREAS[rng.gen_range(0..HOTEL_AREAS.len())];
    let stars = rng.gen_range(2..=5u32).to_string();
    let also = if follow_up { "also " } else { "" };
    vec![
        plain_turn(0, format!("i {also}need a hotel in the {area}"), "Hotel-Inform", &[("area", area)]),
        plain_turn(1, "how many stars should the hotel have ?".into(), "Hotel-Request", &[("stars", "?")]),
        plain_turn(0, format!("{stars} stars please"), "Hotel-Inform", &[("stars", &stars)]),
        plain_turn(1, "i have booked it for you . goodbye".into(), "general-bye", &[]),
    ]
}

/// Generates `config.dialogues` dialogues; identical config gives identical output.
pub fn generate_corpus(env: &DialogueEnv, config: &SynthConfig) -> Result<Vec<RawDialogue>, CorpusError> {
    let user_templates = TemplateSet::bundled_user();
    let system_templates = TemplateSet::bundled_system();
    let policy = RulePolicy::new(&env.ontology);
    let base = mix_seed(config.seed, SYNTH_STREAM);
    let mut out = Vec::with_capacity(config.dialogues);
    for i in 0..config.dialogues {
        let mut rng = stream_rng(base, i as u64);
        let roll: f64 = rng.gen();
        if roll < config.hotel_fraction {
            let turns = hotel_exchange(&mut rng, false);
            out.push(RawDialogue {
                id: format!("SYN{i:05}"),
                services: vec!["hotel".into()],
                turns,
            });
            continue;
        }
        let goal = env.sample_goal(&mut rng)?;
        let mut pol = |s: &crate::dialogue::DialogueState, _: &[f64]| {
            Ok(env.actions().index_of(&policy.action(s)).expect("rule actions are in the action space"))
        };
        let result = env.rollout(goal, &mut pol, &mut rng)?;
        let mut turns: Vec<Turn> = result
            .transcript
            .iter()
            .map(|t| {
                let (speaker, templates) = match t.speaker {
                    Speaker::User => (0, &user_templates),
                    Speaker::Agent => (1, &system_templates),
                };
                surface_turn(speaker, &t.frame, templates, config.synonym_rate, &mut rng)
            })
            .collect();
        let mut services = vec!["restaurant".to_string()];
        if turns.len().is_multiple_of(2) && rng.gen_bool(config.multi_domain_fraction.clamp(0.0, 1.0)) {
            turns.extend(hotel_exchange(&mut rng, true));
            services.push("hotel".into());
        }
        let d = RawDialogue {
            id: format!("SYN{i:05}"),
            services,
            turns,
        };
        d.validate()?;
        out.push(d);
    }
    Ok(out)
}
