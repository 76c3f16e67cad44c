use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bio::{annotate_bio, AnnotatedUtterance, AnnotationWarning, SynonymTable, REQUEST_SENTINEL};
use super::{filter_restaurant, map_act_types, serialize_frames_pair, split_corpus, ActMapping, CorpusError, RawDialogue, Turn, DELIMITER};
use crate::ontology::DomainOntology;
use crate::pipeline::frame::{is_name, SemanticFrame};

/// Domains whose acts are kept; `general` carries greetings and farewells.
const KEPT_DOMAINS: [&str; 3] = ["restaurant", "general", "booking"];

const NLU_RATIO: (u32, u32) = (70, 30);
const NLG_RATIO: (u32, u32) = (90, 10);

/// Canonical slot name for a corpus slot, or `None` if it belongs to another
/// domain. `restaurant-pricerange`, `Price` and `price range` all become
/// `pricerange`; booking slots drop their `book` prefix.
pub fn normalize_slot(raw: &str) -> Option<String> {
    let lower = raw.trim().to_lowercase();
    let bare = match lower.split_once('-') {
        Some((domain, rest)) if KEPT_DOMAINS.contains(&domain) => rest.to_string(),
        Some(_) => return None,
        None => lower,
    };
    let bare = bare.replace(' ', "");
    let name = match bare.as_str() {
        "price" => "pricerange",
        "addr" => "address",
        "post" => "postcode",
        "bookday" => "day",
        "bookpeople" => "people",
        "booktime" => "time",
        other => other,
    };
    Some(name.to_string())
}

fn act_domain_kept(act_type: &str) -> bool {
    match act_type.split_once('-') {
        Some((domain, _)) => KEPT_DOMAINS.contains(&domain.to_lowercase().as_str()),
        None => true,
    }
}

/// Mapped acts of `turn` that belong to a kept domain, as (intent, slots)
/// with slot names normalised and unknown or `none` slots dropped.
fn kept_acts(original: &Turn, mapped: &Turn, ontology: &DomainOntology) -> Vec<(String, BTreeMap<String, String>)> {
    original
        .dialogue_acts
        .iter()
        .zip(&mapped.dialogue_acts)
        .filter(|(o, _)| act_domain_kept(&o.act_type))
        .map(|(_, m)| {
            let slots = m
                .slots
                .iter()
                .filter_map(|(s, v)| {
                    let slot = normalize_slot(s)?;
                    let value = v.trim().to_lowercase();
                    (ontology.has_slot(&slot) && !value.is_empty() && value != "none").then_some((slot, value))
                })
                .collect();
            (m.act_type.to_lowercase(), slots)
        })
        .collect()
}

/// Intent and slot map of a user turn; request slots carry `"?"`.
/// Returns `None` when no kept act maps to an ontology intent.
pub fn user_intent_and_slots(
    original: &Turn,
    mapped: &Turn,
    ontology: &DomainOntology,
) -> Option<(String, BTreeMap<String, String>)> {
    let acts = kept_acts(original, mapped, ontology);
    let mut slots = BTreeMap::new();
    for (act, s) in &acts {
        if act == "inform" || act == "request" {
            for (k, v) in s {
                let v = if act == "request" { REQUEST_SENTINEL } else { v.as_str() };
                slots.entry(k.clone()).or_insert_with(|| v.to_string());
            }
        }
    }
    let has = |name: &str| acts.iter().any(|(a, s)| a == name && !s.is_empty());
    let intent = if has("inform") {
        "inform".to_string()
    } else if has("request") {
        "request".to_string()
    } else {
        acts.iter().map(|(a, _)| a).find(|a| ontology.has_intent(a))?.clone()
    };
    Some((intent, slots))
}

/// System acts of a turn as frames, one per act type in order of appearance.
pub fn system_frames(original: &Turn, mapped: &Turn, ontology: &DomainOntology) -> Vec<SemanticFrame> {
    let mut frames: Vec<SemanticFrame> = Vec::new();
    for (act, slots) in kept_acts(original, mapped, ontology) {
        if !ontology.has_intent(&act) || !is_name(&act) {
            continue;
        }
        let idx = match frames.iter().position(|f| f.act == act) {
            Some(i) => i,
            None => {
                frames.push(SemanticFrame::new(act));
                frames.len() - 1
            }
        };
        for (slot, value) in slots {
            if value == REQUEST_SENTINEL {
                frames[idx].requests.insert(slot);
            } else {
                frames[idx].slots.entry(slot).or_insert(value);
            }
        }
    }
    frames
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepSummary {
    pub dialogues_in: usize,
    pub restaurant_dialogues: usize,
    pub nlu_examples: usize,
    pub nlg_pairs: usize,
    pub skipped_turns: usize,
    pub annotation_warnings: usize,
    pub nlu_train: usize,
    pub nlu_test: usize,
    pub nlg_train: usize,
    pub nlg_test: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrepOutput {
    pub nlu_train: Vec<AnnotatedUtterance>,
    pub nlu_test: Vec<AnnotatedUtterance>,
    pub nlg_train: Vec<String>,
    pub nlg_test: Vec<String>,
    pub warnings: Vec<AnnotationWarning>,
    pub summary: PrepSummary,
}

fn split_or_empty<T: Clone>(items: &[T], ratio: (u32, u32), seed: u64) -> Result<(Vec<T>, Vec<T>), CorpusError> {
    if items.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    split_corpus(items, ratio, seed)
}

/// Filter → act mapping → annotation and serialisation → splits.
pub fn prepare_corpus(
    dialogues: &[RawDialogue],
    mapping: &ActMapping,
    ontology: &DomainOntology,
    synonyms: &SynonymTable,
    seed: u64,
) -> Result<PrepOutput, CorpusError> {
    let mut summary = PrepSummary {
        dialogues_in: dialogues.len(),
        ..Default::default()
    };
    let kept = filter_restaurant(dialogues.to_vec());
    summary.restaurant_dialogues = kept.len();
    let mut nlu = Vec::new();
    let mut nlg = Vec::new();
    let mut warnings = Vec::new();
    for dialogue in &kept {
        let mapped = map_act_types(dialogue, mapping)?;
        for (orig, turn) in dialogue.turns.iter().zip(&mapped.turns) {
            let utterance = turn.utterance.split_whitespace().collect::<Vec<_>>().join(" ");
            if turn.speaker == 0 {
                let Some((intent, slots)) = user_intent_and_slots(orig, turn, ontology) else {
                    summary.skipped_turns += 1;
                    continue;
                };
                let (example, w) = annotate_bio(&utterance, &intent, &slots, ontology, synonyms)?;
                warnings.extend(w);
                nlu.push(example);
            } else {
                let frames = system_frames(orig, turn, ontology);
                if frames.is_empty() || utterance.contains(DELIMITER) {
                    summary.skipped_turns += 1;
                    continue;
                }
                match serialize_frames_pair(&frames, &utterance) {
                    Ok(line) => nlg.push(line),
                    Err(CorpusError::Frame(e)) => {
                        log::warn!("dialogue {}: skipping system turn: {e}", dialogue.id);
                        summary.skipped_turns += 1;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    let (nlu_train, nlu_test) = split_or_empty(&nlu, NLU_RATIO, seed)?;
    let (nlg_train, nlg_test) = split_or_empty(&nlg, NLG_RATIO, seed)?;
    summary.nlu_examples = nlu.len();
    summary.nlg_pairs = nlg.len();
    summary.annotation_warnings = warnings.len();
    summary.nlu_train = nlu_train.len();
    summary.nlu_test = nlu_test.len();
    summary.nlg_train = nlg_train.len();
    summary.nlg_test = nlg_test.len();
    Ok(PrepOutput {
        nlu_train,
        nlu_test,
        nlg_train,
        nlg_test,
        warnings,
        summary,
    })
}

impl PrepOutput {
    /// Writes `nlu_{train,test}.jsonl`, `nlg_{train,test}.txt`,
    /// `warnings.jsonl` and `summary.json` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<(), CorpusError> {
        let dir = dir.as_ref();
        let io = |path: &Path| {
            let p = path.display().to_string();
            move |source| CorpusError::Io { path: p, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let write = |name: &str, lines: Vec<String>| -> Result<(), CorpusError> {
            let path = dir.join(name);
            let mut f = std::io::BufWriter::new(std::fs::File::create(&path).map_err(io(&path))?);
            for l in lines {
                writeln!(f, "{l}").map_err(io(&path))?;
            }
            f.flush().map_err(io(&path))
        };
        let json = |v: &[AnnotatedUtterance]| v.iter().map(|u| serde_json::to_string(u).expect("serialisable")).collect();
        write("nlu_train.jsonl", json(&self.nlu_train))?;
        write("nlu_test.jsonl", json(&self.nlu_test))?;
        write("nlg_train.txt", self.nlg_train.clone())?;
        write("nlg_test.txt", self.nlg_test.clone())?;
        write(
            "warnings.jsonl",
            self.warnings.iter().map(|w| serde_json::to_string(w).expect("serialisable")).collect(),
        )?;
        write("summary.json", vec![serde_json::to_string_pretty(&self.summary).expect("serialisable")])
    }
}
