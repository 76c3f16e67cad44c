use std::collections::BTreeMap;
use std::path::Path;

use super::{CorpusError, RawDialogue};

/// Act-type simplification table, e.g. `Restaurant-Request` → `Request`.
pub type ActMapping = BTreeMap<String, String>;

const BUNDLED_MAPPING: &str = include_str!("../../data/act_mapping.json");

pub fn bundled_act_mapping() -> ActMapping {
    serde_json::from_str(BUNDLED_MAPPING).expect("bundled act mapping is valid JSON")
}

pub fn load_act_mapping(path: impl AsRef<Path>) -> Result<ActMapping, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CorpusError::Format {
        context: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Rewrites every turn-level and span-level act type through `mapping`.
/// Any act type missing from the table is an error.
pub fn map_act_types(dialogue: &RawDialogue, mapping: &ActMapping) -> Result<RawDialogue, CorpusError> {
    let lookup = |turn: usize, act: &str| {
        mapping.get(act).cloned().ok_or_else(|| CorpusError::UnmappedAct {
            dialogue: dialogue.id.clone(),
            turn,
            act_type: act.to_string(),
        })
    };
    let mut out = dialogue.clone();
    for (i, turn) in out.turns.iter_mut().enumerate() {
        for act in &mut turn.dialogue_acts {
            act.act_type = lookup(i, &act.act_type)?;
        }
        for span in &mut turn.span_info {
            span.act_type = lookup(i, &span.act_type)?;
        }
    }
    Ok(out)
}

/// Keeps dialogues whose services include the restaurant domain, in order.
pub fn filter_restaurant(dialogues: Vec<RawDialogue>) -> Vec<RawDialogue> {
    dialogues
        .into_iter()
        .filter(|d| d.services.iter().any(|s| s.eq_ignore_ascii_case("restaurant")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DialogueAct, SpanInfo, Turn};

    fn two_turn() -> RawDialogue {
        RawDialogue {
            id: "d1".into(),
            services: vec!["restaurant".into()],
            turns: vec![
                Turn {
                    speaker: 0,
                    utterance: "i want food in the north".into(),
                    dialogue_acts: vec![DialogueAct {
                        act_type: "Restaurant-Inform".into(),
                        slots: [("area".to_string(), "north".to_string())].into(),
                    }],
                    span_info: vec![SpanInfo {
                        act_type: "Restaurant-Inform".into(),
                        slot: "area".into(),
                        value: "north".into(),
                        start: 19,
                        end: 24,
                    }],
                },
                Turn {
                    speaker: 1,
                    utterance: "what food would you like ?".into(),
                    dialogue_acts: vec![DialogueAct {
                        act_type: "Restaurant-Request".into(),
                        slots: [("food".to_string(), "?".to_string())].into(),
                    }],
                    span_info: vec![],
                },
            ],
        }
    }

    #[test]
    fn domain_prefix_is_removed_everywhere() {
        let mapped = map_act_types(&two_turn(), &bundled_act_mapping()).unwrap();
        assert_eq!(mapped.turns[0].dialogue_acts[0].act_type, "Inform");
        assert_eq!(mapped.turns[1].dialogue_acts[0].act_type, "Request");
        let span = &mapped.turns[0].span_info[0];
        assert_eq!((span.act_type.as_str(), span.start, span.end), ("Inform", 19, 24));
        assert_eq!(mapped.turns[0].utterance, two_turn().turns[0].utterance);
    }

    #[test]
    fn mapping_is_idempotent() {
        let m = bundled_act_mapping();
        let once = map_act_types(&two_turn(), &m).unwrap();
        assert_eq!(map_act_types(&once, &m).unwrap(), once);
        for v in m.values() {
            assert_eq!(m.get(v), Some(v), "codomain value {v} must map to itself");
        }
    }

    #[test]
    fn unmapped_act_reports_location() {
        let mut m = bundled_act_mapping();
        m.remove("Restaurant-Request");
        match map_act_types(&two_turn(), &m) {
            Err(CorpusError::UnmappedAct { dialogue, turn, act_type }) => {
                assert_eq!((dialogue.as_str(), turn, act_type.as_str()), ("d1", 1, "Restaurant-Request"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn restaurant_filter() {
        let mut hotel = two_turn();
        hotel.id = "h".into();
        hotel.services = vec!["hotel".into()];
        let mut both = two_turn();
        both.id = "b".into();
        both.services = vec!["hotel".into(), "restaurant".into()];
        let kept = filter_restaurant(vec![two_turn(), hotel, both]);
        let ids: Vec<&str> = kept.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, vec!["d1", "b"]);
        assert!(filter_restaurant(vec![]).is_empty());
    }
}
