//! Template-based generation.
//!
//! Keys look like `act(slot1,slot2)` with names sorted. A frame is realised by
//! the first tier that covers it:
//!
//! 1. the exact key for its act and all slot and request names;
//! 2. one fragment per name, joined with `" , "`: `act(slot)` for values
//!    (`inform(slot)` when the act is `request`), `request(name)` for requests;
//! 3. a generic rendering that spells out every name and value.
//!
//! `dontcare` values are realised through `dontcare(slot)` fragments. Every
//! other slot value is guaranteed to appear verbatim in the output; a tier
//! whose result would drop a value is skipped.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use super::frame::SemanticFrame;
use crate::simulator::DONTCARE;

const SYSTEM_TEMPLATES: &str = include_str!("../../data/nlg_templates.json");
const USER_TEMPLATES: &str = include_str!("../../data/user_templates.json");

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template key `{0}` is not of the form act(slot,...)")]
    BadKey(String),
    #[error("template `{key}` uses placeholder {{{placeholder}}} missing from its key")]
    UnknownPlaceholder { key: String, placeholder: String },
    #[error("{path}: {message}")]
    Load { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<String, String>,
}

/// `act(a,b)` for the given names, sorted and deduplicated.
pub fn template_key<'a>(act: &str, names: impl IntoIterator<Item = &'a String>) -> String {
    let mut names: Vec<&str> = names.into_iter().map(String::as_str).collect();
    names.sort_unstable();
    names.dedup();
    format!("{act}({})", names.join(","))
}

fn parse_key(key: &str) -> Option<(&str, Vec<&str>)> {
    let (act, rest) = key.split_once('(')?;
    let inner = rest.strip_suffix(')')?;
    let names = if inner.is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(str::trim).collect()
    };
    (!act.is_empty()).then_some((act, names))
}

fn placeholders(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let Some(close) = rest[open..].find('}') else { break };
        out.push(&rest[open + 1..open + close]);
        rest = &rest[open + close + 1..];
    }
    out
}

impl TemplateSet {
    pub fn new(templates: BTreeMap<String, String>) -> Result<Self, TemplateError> {
        let mut normalised = BTreeMap::new();
        for (key, text) in templates {
            let (act, names) = parse_key(&key).ok_or_else(|| TemplateError::BadKey(key.clone()))?;
            for p in placeholders(&text) {
                if !names.contains(&p) {
                    return Err(TemplateError::UnknownPlaceholder {
                        key: key.clone(),
                        placeholder: p.to_string(),
                    });
                }
            }
            let owned: Vec<String> = names.iter().map(|s| s.to_string()).collect();
            normalised.insert(template_key(act, &owned), text);
        }
        Ok(TemplateSet { templates: normalised })
    }

    /// System-side templates shipped with the crate.
    pub fn bundled_system() -> Self {
        Self::from_json(SYSTEM_TEMPLATES).expect("bundled system templates are valid")
    }

    /// User-side templates used by the simulator's surface realiser.
    pub fn bundled_user() -> Self {
        Self::from_json(USER_TEMPLATES).expect("bundled user templates are valid")
    }

    pub fn from_json(json: &str) -> Result<Self, TemplateError> {
        let map: BTreeMap<String, String> = serde_json::from_str(json).map_err(|e| TemplateError::Load {
            path: "<json>".into(),
            message: e.to_string(),
        })?;
        Self::new(map)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TemplateError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| TemplateError::Load {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text).map_err(|e| match e {
            TemplateError::Load { message, .. } => TemplateError::Load {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.templates.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    fn fill(&self, key: &str, values: &BTreeMap<String, String>) -> Option<String> {
        let mut text = self.get(key)?.to_string();
        for (slot, value) in values {
            text = text.replace(&format!("{{{slot}}}"), value);
        }
        values.values().all(|v| text.contains(v.as_str())).then_some(text)
    }

    fn exact(&self, act: &str, values: &BTreeMap<String, String>, requests: &[&String]) -> Option<String> {
        let key = template_key(act, values.keys().chain(requests.iter().copied()));
        self.fill(&key, values)
    }

    fn composed(&self, act: &str, values: &BTreeMap<String, String>, requests: &[&String]) -> Option<String> {
        let slot_act = if act == "request" { "inform" } else { act };
        let mut parts = Vec::new();
        for (slot, value) in values {
            let one = BTreeMap::from([(slot.clone(), value.clone())]);
            parts.push(self.fill(&template_key(slot_act, [slot]), &one)?);
        }
        for r in requests {
            parts.push(self.fill(&template_key("request", [*r]), &BTreeMap::new())?);
        }
        (!parts.is_empty()).then(|| parts.join(" , "))
    }

    fn generic(act: &str, values: &BTreeMap<String, String>, requests: &[&String]) -> String {
        let mut parts: Vec<String> = values.iter().map(|(s, v)| format!("{s} {v}")).collect();
        parts.extend(requests.iter().map(|r| format!("{r} ?")));
        if parts.is_empty() {
            act.to_string()
        } else {
            format!("{act} : {}", parts.join(" , "))
        }
    }

    /// Realises a frame; total over all frames.
    pub fn realize(&self, frame: &SemanticFrame) -> String {
        let (dontcare, values): (BTreeMap<_, _>, BTreeMap<_, _>) =
            frame.slots.clone().into_iter().partition(|(_, v)| v == DONTCARE);
        let requests: Vec<&String> = frame.requests.iter().filter(|r| !frame.slots.contains_key(*r)).collect();
        let act = frame.act.as_str();
        let mut out = Vec::new();
        if !values.is_empty() || !requests.is_empty() || dontcare.is_empty() {
            out.push(
                self.exact(act, &values, &requests)
                    .or_else(|| self.composed(act, &values, &requests))
                    .unwrap_or_else(|| Self::generic(act, &values, &requests)),
            );
        }
        for slot in dontcare.keys() {
            out.push(
                self.get(&template_key("dontcare", [slot]))
                    .map(str::to_string)
                    .unwrap_or_else(|| format!("{slot} {DONTCARE}")),
            );
        }
        out.join(" , ")
    }

    /// Realises several frames in order, joined with `" . "`.
    pub fn realize_all(&self, frames: &[SemanticFrame]) -> String {
        frames.iter().map(|f| self.realize(f)).collect::<Vec<_>>().join(" . ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_templates() {
        let t = TemplateSet::bundled_system();
        let f = SemanticFrame::new("inform").with_slot("phone", "01223 323737");
        assert_eq!(t.realize(&f), "the phone number is 01223 323737");
        let r = SemanticFrame::new("request").with_request("area");
        assert_eq!(t.realize(&r), "which area are you looking for ?");
        assert_eq!(t.realize(&SemanticFrame::new("greet")), t.get("greet()").unwrap());
    }

    #[test]
    fn composition_and_fallback() {
        let t = TemplateSet::bundled_system();
        let f = SemanticFrame::new("inform").with_slot("phone", "1").with_slot("postcode", "cb1");
        assert_eq!(t.realize(&f), "the phone number is 1 , the postcode is cb1");
        let g = SemanticFrame::new("offerbook").with_slot("time", "19:00");
        assert_eq!(t.realize(&g), "offerbook : time 19:00");
        assert_eq!(t.realize(&SemanticFrame::new("welcome")), "welcome");
    }

    #[test]
    fn user_dontcare() {
        let t = TemplateSet::bundled_user();
        let f = SemanticFrame::new("inform").with_slot("area", DONTCARE).with_slot("food", "indian");
        assert_eq!(t.realize(&f), "i want indian food , any area is fine");
        let only = SemanticFrame::new("inform").with_slot("food", DONTCARE);
        assert_eq!(t.realize(&only), "any food is fine");
    }

    #[test]
    fn placeholder_validation() {
        let bad = BTreeMap::from([("inform(area)".to_string(), "{food}".to_string())]);
        assert!(matches!(TemplateSet::new(bad), Err(TemplateError::UnknownPlaceholder { .. })));
        let key = BTreeMap::from([("inform".to_string(), "x".to_string())]);
        assert!(matches!(TemplateSet::new(key), Err(TemplateError::BadKey(_))));
        // key order is normalised
        let t = TemplateSet::new(BTreeMap::from([("a(y,x)".to_string(), "{x}{y}".to_string())])).unwrap();
        assert!(t.get("a(x,y)").is_some());
    }

    #[test]
    fn missing_placeholder_falls_through() {
        let t = TemplateSet::new(BTreeMap::from([("inform(area)".to_string(), "somewhere".to_string())])).unwrap();
        let f = SemanticFrame::new("inform").with_slot("area", "north");
        assert_eq!(t.realize(&f), "inform : area north");
    }
}
