//! Corpus preparation: MultiWOZ-style ingestion, act-type simplification,
//! restaurant filtering, BIO annotation, frame/utterance serialisation and
//! deterministic splits.

mod acts;
mod bio;
mod loader;
mod prep;
mod serialize;
mod split;
mod synth;

pub use acts::{bundled_act_mapping, filter_restaurant, load_act_mapping, map_act_types, ActMapping};
pub use bio::{
    annotate_bio, bundled_synonyms, check_bio, decode_spans, load_synonyms, AnnotatedUtterance, AnnotationWarning,
    SynonymTable, REQUEST_SENTINEL,
};
pub use loader::{load_dialogues, parse_dialogues};
pub use prep::{normalize_slot, prepare_corpus, system_frames, user_intent_and_slots, PrepOutput, PrepSummary};
pub use serialize::{parse_pair, serialize_frames_pair, serialize_pair, DELIMITER};
pub use split::split_corpus;
pub use synth::{generate_corpus, SynthConfig};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("dialogue {dialogue}, turn {turn}: unmapped act type `{act_type}`")]
    UnmappedAct {
        dialogue: String,
        turn: usize,
        act_type: String,
    },
    #[error("slot `{0}` is not in the ontology")]
    UnknownSlot(String),
    #[error("utterance contains the delimiter token {DELIMITER:?}")]
    DelimiterInUtterance,
    #[error("line breaks are not allowed in a serialised pair")]
    LineBreak,
    #[error("missing delimiter {DELIMITER:?} after the frames")]
    MissingDelimiter,
    #[error("split ratio {0}:{1} must sum to 100")]
    BadRatio(u32, u32),
    #[error("cannot split an empty list")]
    EmptyInput,
    #[error("{context}: {message}")]
    Format { context: String, message: String },
    #[error(transparent)]
    Frame(#[from] crate::pipeline::frame::FrameError),
    #[error(transparent)]
    Simulation(#[from] crate::dialogue::DialogueError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One act in a turn; request slots carry the value `"?"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueAct {
    pub act_type: String,
    #[serde(default)]
    pub slots: BTreeMap<String, String>,
}

/// Character span of a slot value inside the turn's utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanInfo {
    pub act_type: String,
    pub slot: String,
    pub value: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    /// 0 for the user, 1 for the system.
    pub speaker: u8,
    pub utterance: String,
    #[serde(default)]
    pub dialogue_acts: Vec<DialogueAct>,
    #[serde(default)]
    pub span_info: Vec<SpanInfo>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDialogue {
    #[serde(rename = "dialogue_id")]
    pub id: String,
    #[serde(default)]
    pub services: Vec<String>,
    pub turns: Vec<Turn>,
}

impl RawDialogue {
    /// Checks speaker alternation, non-empty utterances and span bounds.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let fail = |turn: usize, message: String| CorpusError::Format {
            context: format!("dialogue {}, turn {turn}", self.id),
            message,
        };
        for (i, t) in self.turns.iter().enumerate() {
            if usize::from(t.speaker) != i % 2 {
                return Err(fail(i, format!("speaker {} out of alternation", t.speaker)));
            }
            if t.utterance.trim().is_empty() {
                return Err(fail(i, "empty utterance".into()));
            }
            for s in &t.span_info {
                let chars = t.utterance.chars().count();
                if s.start > s.end || s.end > chars {
                    return Err(fail(i, format!("span {}..{} outside utterance of {chars} chars", s.start, s.end)));
                }
            }
        }
        Ok(())
    }
}
