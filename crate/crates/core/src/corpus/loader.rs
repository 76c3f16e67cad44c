//! Reads dialogues in three layouts:
//!
//! * row records with `turns` as a list of objects (the crate's own format and
//!   the MultiWOZ 2.2 release, whose speakers are `"USER"`/`"SYSTEM"`);
//! * the columnar export used by dataset hubs, where `turns` and its nested
//!   act fields are objects of parallel arrays;
//! * either of the above as a JSON array, an object keyed by dialogue id, or
//!   JSON lines.
//!
//! Turn-level acts may be a list of `{act_type, slots}` or a MultiWOZ-style
//! map `{"Restaurant-Inform": [["area", "north"]]}`; span info may be objects
//! or `[act, slot, value, start, end]` arrays.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value;

use super::{CorpusError, DialogueAct, RawDialogue, SpanInfo, Turn};

pub fn load_dialogues(path: impl AsRef<Path>) -> Result<Vec<RawDialogue>, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dialogues(&text).map_err(|e| match e {
        CorpusError::Format { context, message } => CorpusError::Format {
            context: format!("{}: {context}", path.display()),
            message,
        },
        other => other,
    })
}

pub fn parse_dialogues(text: &str) -> Result<Vec<RawDialogue>, CorpusError> {
    let trimmed = text.trim_start();
    let records: Vec<(String, Value)> = match serde_json::from_str::<Value>(text) {
        Ok(Value::Array(items)) => items
            .into_iter()
            .enumerate()
            .map(|(i, v)| (format!("record {i}"), v))
            .collect(),
        Ok(Value::Object(map)) if map.contains_key("turns") => vec![("record 0".into(), Value::Object(map))],
        Ok(Value::Object(map)) => map
            .into_iter()
            .map(|(id, mut v)| {
                if let Some(obj) = v.as_object_mut() {
                    obj.entry("dialogue_id").or_insert(Value::String(id.clone()));
                }
                (id, v)
            })
            .collect(),
        Ok(_) => return Err(fmt_err("input", "expected an array, an object or JSON lines")),
        Err(_) if trimmed.starts_with('{') => {
            let mut out = Vec::new();
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let v = serde_json::from_str(line).map_err(|e| fmt_err(format!("line {}", i + 1), e))?;
                out.push((format!("line {}", i + 1), v));
            }
            out
        }
        Err(e) => return Err(fmt_err("input", e)),
    };
    records
        .into_iter()
        .map(|(ctx, v)| {
            let d = dialogue_from_value(&v).map_err(|m| fmt_err(&ctx, m))?;
            d.validate()?;
            Ok(d)
        })
        .collect()
}

fn fmt_err(context: impl std::fmt::Display, message: impl std::fmt::Display) -> CorpusError {
    CorpusError::Format {
        context: context.to_string(),
        message: message.to_string(),
    }
}

fn as_str(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn dialogue_from_value(v: &Value) -> Result<RawDialogue, String> {
    let obj = v.as_object().ok_or("dialogue is not an object")?;
    let id = obj
        .get("dialogue_id")
        .or_else(|| obj.get("id"))
        .and_then(as_str)
        .ok_or("missing dialogue_id")?;
    let services = match obj.get("services") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(a)) => a.iter().filter_map(as_str).collect(),
        Some(_) => return Err("services must be a list".into()),
    };
    let turns = match obj.get("turns") {
        Some(Value::Array(rows)) => rows.iter().map(turn_from_row).collect::<Result<_, _>>()?,
        Some(Value::Object(cols)) => turns_from_columns(cols)?,
        _ => return Err("missing turns".into()),
    };
    Ok(RawDialogue { id, services, turns })
}

fn speaker(v: Option<&Value>) -> Result<u8, String> {
    match v {
        Some(Value::Number(n)) if n.as_u64() == Some(0) => Ok(0),
        Some(Value::Number(n)) if n.as_u64() == Some(1) => Ok(1),
        Some(Value::String(s)) if s.eq_ignore_ascii_case("user") => Ok(0),
        Some(Value::String(s)) if s.eq_ignore_ascii_case("system") => Ok(1),
        other => Err(format!("bad speaker {other:?}")),
    }
}

fn turn_from_row(v: &Value) -> Result<Turn, String> {
    let obj = v.as_object().ok_or("turn is not an object")?;
    let utterance = obj.get("utterance").and_then(as_str).ok_or("missing utterance")?;
    let acts = obj.get("dialogue_acts").or_else(|| obj.get("dialog_act"));
    let (dialogue_acts, mut span_info) = match acts {
        None | Some(Value::Null) => (Vec::new(), Vec::new()),
        Some(v) => acts_from_value(v)?,
    };
    if let Some(spans) = obj.get("span_info") {
        span_info.extend(spans_from_value(spans)?);
    }
    Ok(Turn {
        speaker: speaker(obj.get("speaker"))?,
        utterance,
        dialogue_acts,
        span_info,
    })
}

/// Returns acts and any span info nested beside them (columnar `dialog_act`
/// objects carry both).
fn acts_from_value(v: &Value) -> Result<(Vec<DialogueAct>, Vec<SpanInfo>), String> {
    match v {
        Value::Array(items) => {
            let acts = items
                .iter()
                .map(|a| serde_json::from_value::<DialogueAct>(a.clone()).map_err(|e| e.to_string()))
                .collect::<Result<_, _>>()?;
            Ok((acts, Vec::new()))
        }
        Value::Object(map) if map.contains_key("dialog_act") => {
            let acts = columnar_acts(&map["dialog_act"])?;
            let spans = match map.get("span_info") {
                Some(s) => spans_from_value(s)?,
                None => Vec::new(),
            };
            Ok((acts, spans))
        }
        Value::Object(map) if map.contains_key("act_type") && map.get("act_type").is_some_and(Value::is_array) => {
            Ok((columnar_acts(v)?, Vec::new()))
        }
        Value::Object(map) => {
            let mut acts = Vec::new();
            for (act_type, pairs) in map {
                let mut slots = BTreeMap::new();
                for p in pairs.as_array().ok_or("act slots must be a list")? {
                    let pair = p.as_array().filter(|a| a.len() == 2).ok_or("act slot must be [slot, value]")?;
                    let (s, val) = (as_str(&pair[0]), as_str(&pair[1]));
                    slots.insert(s.ok_or("slot is not text")?, val.ok_or("value is not text")?);
                }
                acts.push(DialogueAct {
                    act_type: act_type.clone(),
                    slots,
                });
            }
            Ok((acts, Vec::new()))
        }
        _ => Err("unrecognised dialogue_acts".into()),
    }
}

/// `{act_type: [..], act_slots: [{slot_name: [..], slot_value: [..]}]}`
fn columnar_acts(v: &Value) -> Result<Vec<DialogueAct>, String> {
    let types = v.get("act_type").and_then(Value::as_array).ok_or("missing act_type column")?;
    let slots = v.get("act_slots").and_then(Value::as_array);
    let mut acts = Vec::new();
    for (i, t) in types.iter().enumerate() {
        let mut map = BTreeMap::new();
        if let Some(cols) = slots.and_then(|s| s.get(i)) {
            let names = cols.get("slot_name").and_then(Value::as_array).ok_or("missing slot_name")?;
            let values = cols.get("slot_value").and_then(Value::as_array).ok_or("missing slot_value")?;
            if names.len() != values.len() {
                return Err("slot_name and slot_value lengths differ".into());
            }
            for (n, val) in names.iter().zip(values) {
                map.insert(as_str(n).ok_or("slot is not text")?, as_str(val).ok_or("value is not text")?);
            }
        }
        acts.push(DialogueAct {
            act_type: as_str(t).ok_or("act type is not text")?,
            slots: map,
        });
    }
    Ok(acts)
}

fn spans_from_value(v: &Value) -> Result<Vec<SpanInfo>, String> {
    match v {
        Value::Null => Ok(Vec::new()),
        Value::Array(items) => items
            .iter()
            .map(|s| match s {
                Value::Array(a) if a.len() == 5 => {
                    let text = |i: usize| as_str(&a[i]).ok_or_else(|| format!("span field {i} is not text"));
                    let pos = |i: usize| a[i].as_u64().map(|x| x as usize).ok_or_else(|| format!("span field {i} is not an offset"));
                    Ok(SpanInfo {
                        act_type: text(0)?,
                        slot: text(1)?,
                        value: text(2)?,
                        start: pos(3)?,
                        end: pos(4)?,
                    })
                }
                other => serde_json::from_value(other.clone()).map_err(|e| e.to_string()),
            })
            .collect(),
        Value::Object(cols) => {
            let col = |k: &str| cols.get(k).and_then(Value::as_array).ok_or_else(|| format!("missing span column {k}"));
            let (acts, names, values) = (col("act_type")?, col("act_slot_name")?, col("act_slot_value")?);
            let (starts, ends) = (col("span_start")?, col("span_end")?);
            let n = acts.len();
            if [names.len(), values.len(), starts.len(), ends.len()].iter().any(|&l| l != n) {
                return Err("span columns have different lengths".into());
            }
            (0..n)
                .map(|i| {
                    Ok(SpanInfo {
                        act_type: as_str(&acts[i]).ok_or("span act is not text")?,
                        slot: as_str(&names[i]).ok_or("span slot is not text")?,
                        value: as_str(&values[i]).ok_or("span value is not text")?,
                        start: starts[i].as_u64().ok_or("span start is not an offset")? as usize,
                        end: ends[i].as_u64().ok_or("span end is not an offset")? as usize,
                    })
                })
                .collect()
        }
        _ => Err("unrecognised span_info".into()),
    }
}

fn turns_from_columns(cols: &serde_json::Map<String, Value>) -> Result<Vec<Turn>, String> {
    let col = |k: &str| cols.get(k).and_then(Value::as_array);
    let speakers = col("speaker").ok_or("missing speaker column")?;
    let utterances = col("utterance").ok_or("missing utterance column")?;
    if speakers.len() != utterances.len() {
        return Err("speaker and utterance columns differ in length".into());
    }
    let acts = col("dialogue_acts");
    let mut turns = Vec::with_capacity(speakers.len());
    for i in 0..speakers.len() {
        let (dialogue_acts, span_info) = match acts.and_then(|a| a.get(i)) {
            Some(v) => acts_from_value(v)?,
            None => (Vec::new(), Vec::new()),
        };
        turns.push(Turn {
            speaker: speaker(Some(&speakers[i]))?,
            utterance: as_str(&utterances[i]).ok_or("utterance is not text")?,
            dialogue_acts,
            span_info,
        });
    }
    Ok(turns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_format_roundtrips() {
        let d = RawDialogue {
            id: "x".into(),
            services: vec!["restaurant".into()],
            turns: vec![Turn {
                speaker: 0,
                utterance: "hi".into(),
                dialogue_acts: vec![DialogueAct {
                    act_type: "general-greet".into(),
                    slots: BTreeMap::new(),
                }],
                span_info: vec![],
            }],
        };
        let array = serde_json::to_string(&vec![d.clone(), d.clone()]).unwrap();
        assert_eq!(parse_dialogues(&array).unwrap(), vec![d.clone(), d.clone()]);
        let lines = format!("{}\n\n{}\n", serde_json::to_string(&d).unwrap(), serde_json::to_string(&d).unwrap());
        assert_eq!(parse_dialogues(&lines).unwrap().len(), 2);
    }

    #[test]
    fn columnar_format() {
        let text = r#"{"dialogue_id": "PMUL1", "services": ["restaurant"],
          "turns": {"turn_id": ["0", "1"], "speaker": [0, 1],
            "utterance": ["a cheap place in the north", "what food ?"],
            "dialogue_acts": [
              {"dialog_act": {"act_type": ["Restaurant-Inform"],
                 "act_slots": [{"slot_name": ["pricerange", "area"], "slot_value": ["cheap", "north"]}]},
               "span_info": {"act_type": ["Restaurant-Inform"], "act_slot_name": ["area"],
                 "act_slot_value": ["north"], "span_start": [21], "span_end": [26]}},
              {"dialog_act": {"act_type": ["Restaurant-Request"],
                 "act_slots": [{"slot_name": ["food"], "slot_value": ["?"]}]},
               "span_info": {"act_type": [], "act_slot_name": [], "act_slot_value": [], "span_start": [], "span_end": []}}
            ]}}"#;
        let d = &parse_dialogues(text).unwrap()[0];
        assert_eq!(d.id, "PMUL1");
        assert_eq!(d.turns[0].dialogue_acts[0].slots["pricerange"], "cheap");
        assert_eq!(d.turns[0].span_info[0].start, 21);
        assert_eq!(&d.turns[0].utterance[21..26], "north");
        assert_eq!(d.turns[1].dialogue_acts[0].act_type, "Restaurant-Request");
    }

    #[test]
    fn multiwoz_style_acts_and_speaker_names() {
        let text = r#"{"SNG01": {"services": ["restaurant"], "turns": [
            {"speaker": "USER", "utterance": "cheap please",
             "dialog_act": {"Restaurant-Inform": [["pricerange", "cheap"]]},
             "span_info": [["Restaurant-Inform", "pricerange", "cheap", 0, 5]]},
            {"speaker": "SYSTEM", "utterance": "ok"}]}}"#;
        let d = &parse_dialogues(text).unwrap()[0];
        assert_eq!(d.id, "SNG01");
        assert_eq!(d.turns[1].speaker, 1);
        assert_eq!(d.turns[0].span_info[0].end, 5);
    }

    #[test]
    fn invalid_inputs() {
        assert!(parse_dialogues("42").is_err());
        assert!(parse_dialogues(r#"[{"dialogue_id": "a", "turns": [{"speaker": 1, "utterance": "x"}]}]"#).is_err());
        assert!(parse_dialogues(r#"[{"dialogue_id": "a", "turns": [{"speaker": 0, "utterance": " "}]}]"#).is_err());
        let bad_span = r#"[{"dialogue_id": "a", "turns": [{"speaker": 0, "utterance": "hi",
            "span_info": [["Inform", "area", "x", 1, 9]]}]}]"#;
        assert!(parse_dialogues(bad_span).is_err());
    }
}
