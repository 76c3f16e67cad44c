//! Lexicon-driven understanding.
//!
//! Slot values are matched longest first over the shared tokenizer's output,
//! synonyms included. A slot name (or one of its `"?"` synonyms) counts as a
//! request when a question cue appears earlier in the utterance, and as a
//! `dontcare` when directly preceded by "any". Intent priority is
//! request > inform > bye > greet; anything else is an empty inform.

use super::frame::SemanticFrame;
use crate::corpus::{annotate_bio, AnnotatedUtterance, CorpusError, SynonymTable, REQUEST_SENTINEL};
use crate::ontology::{DomainOntology, KbRecord};
use crate::simulator::DONTCARE;
use crate::text::tokenize;

const QUESTION_CUES: [&str; 11] = [
    "what", "which", "where", "whats", "how", "could", "can", "do", "does", "tell", "give",
];
const BYE_WORDS: [&str; 5] = ["bye", "goodbye", "thanks", "thank", "cheers"];
const GREET_WORDS: [&str; 4] = ["hello", "hi", "hey", "greetings"];
const ANY: &str = "any";

#[derive(Debug, Clone)]
struct Pattern {
    tokens: Vec<String>,
    slot: String,
    value: String,
}

#[derive(Debug, Clone)]
pub struct TemplateNlu {
    values: Vec<Pattern>,
    names: Vec<Pattern>,
}

impl TemplateNlu {
    pub fn new(ontology: &DomainOntology, synonyms: &SynonymTable) -> Self {
        let mut values = Vec::new();
        let mut names = Vec::new();
        let slots = ontology
            .informable_slots
            .iter()
            .chain(&ontology.requestable_slots)
            .chain(&ontology.book_slots);
        for slot in slots {
            if names.iter().any(|p: &Pattern| &p.slot == slot) {
                continue;
            }
            for v in ontology.values(slot) {
                values.push(Pattern {
                    tokens: tokenize(v),
                    slot: slot.clone(),
                    value: v.clone(),
                });
            }
            let aliases = synonyms.get(slot);
            for (v, forms) in aliases.into_iter().flatten() {
                for form in forms {
                    let p = Pattern {
                        tokens: tokenize(form),
                        slot: slot.clone(),
                        value: v.clone(),
                    };
                    if v == "?" {
                        names.push(p);
                    } else {
                        values.push(p);
                    }
                }
            }
            names.push(Pattern {
                tokens: tokenize(slot),
                slot: slot.clone(),
                value: "?".into(),
            });
        }
        values.retain(|p| !p.tokens.is_empty());
        names.retain(|p| !p.tokens.is_empty());
        // longest first; ties keep ontology order
        values.sort_by_key(|p| std::cmp::Reverse(p.tokens.len()));
        names.sort_by_key(|p| std::cmp::Reverse(p.tokens.len()));
        TemplateNlu { values, names }
    }

    /// Lexicon extended with every value in `kb`.
    pub fn with_kb(ontology: &DomainOntology, kb: &[KbRecord], synonyms: &SynonymTable) -> Self {
        Self::new(&ontology.with_kb_values(kb), synonyms)
    }

    pub fn parse(&self, utterance: &str) -> SemanticFrame {
        let tokens = tokenize(utterance);
        let mut claimed = vec![false; tokens.len()];
        let mut frame = SemanticFrame::new("inform");

        for p in &self.values {
            let n = p.tokens.len();
            if n > tokens.len() {
                continue;
            }
            for start in 0..=tokens.len() - n {
                if claimed[start..start + n].iter().all(|c| !c) && tokens[start..start + n] == p.tokens[..] {
                    claimed[start..start + n].iter_mut().for_each(|c| *c = true);
                    frame.slots.entry(p.slot.clone()).or_insert_with(|| p.value.clone());
                }
            }
        }

        let first_cue = tokens.iter().position(|t| QUESTION_CUES.contains(&t.as_str()));
        for p in &self.names {
            let n = p.tokens.len();
            if n > tokens.len() {
                continue;
            }
            for start in 0..=tokens.len() - n {
                if claimed[start..start + n].iter().any(|c| *c) || tokens[start..start + n] != p.tokens[..] {
                    continue;
                }
                claimed[start..start + n].iter_mut().for_each(|c| *c = true);
                if start > 0 && tokens[start - 1] == ANY {
                    frame.slots.insert(p.slot.clone(), DONTCARE.to_string());
                } else if first_cue.is_some_and(|c| c < start) && !frame.slots.contains_key(&p.slot) {
                    frame.requests.insert(p.slot.clone());
                }
            }
        }

        let has = |words: &[&str]| tokens.iter().any(|t| words.contains(&t.as_str()));
        frame.act = if !frame.requests.is_empty() {
            "request"
        } else if !frame.slots.is_empty() {
            "inform"
        } else if has(&BYE_WORDS) {
            "bye"
        } else if has(&GREET_WORDS) {
            "greet"
        } else {
            "inform"
        }
        .to_string();
        frame
    }

    /// Parses `utterance` and projects the frame back onto its tokens as BIO
    /// tags, so the parser can be scored like a sequence tagger.
    pub fn tag(
        &self,
        utterance: &str,
        ontology: &DomainOntology,
        synonyms: &SynonymTable,
    ) -> Result<AnnotatedUtterance, CorpusError> {
        let frame = self.parse(utterance);
        let mut slots = frame.slots.clone();
        for r in &frame.requests {
            slots.insert(r.clone(), REQUEST_SENTINEL.to_string());
        }
        Ok(annotate_bio(utterance, &frame.act, &slots, ontology, synonyms)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;
    use crate::corpus::bundled_synonyms;
    use crate::ontology::bundled_kb;

    fn nlu() -> TemplateNlu {
        let o = DomainOntology::bundled();
        TemplateNlu::with_kb(&o, &bundled_kb(&o), &bundled_synonyms())
    }

    #[test]
    fn documented_examples() {
        let n = nlu();
        let f = n.parse("i want a cheap restaurant in the north");
        assert_eq!(f.act, "inform");
        assert_eq!(f.slots, BTreeMap::from([("pricerange".into(), "cheap".into()), ("area".into(), "north".into())]));
        let r = n.parse("what is the address");
        assert_eq!(r.act, "request");
        assert!(r.requests.contains("address") && r.requests.len() == 1);
        assert_eq!(n.parse("hello").act, "greet");
        assert_eq!(n.parse("thanks , goodbye").act, "bye");
        let unknown = n.parse("blah blah");
        assert_eq!((unknown.act.as_str(), unknown.slots.len()), ("inform", 0));
    }

    #[test]
    fn synonyms_dontcare_and_mixed() {
        let n = nlu();
        assert_eq!(n.parse("a moderately priced place").slots["pricerange"], "moderate");
        assert_eq!(n.parse("any area is fine").slots["area"], DONTCARE);
        let m = n.parse("i want indian food , what is the phone number ?");
        assert_eq!(m.act, "request");
        assert_eq!(m.slots["food"], "indian");
        assert_eq!(m.requests.iter().collect::<Vec<_>>(), vec!["phone"]);
        let pr = n.parse("what is the price range ?");
        assert!(pr.requests.contains("pricerange"));
    }

    #[test]
    fn tags_match_annotation() {
        let o = DomainOntology::bundled();
        let a = nlu().tag("i want cheap food , what is the phone number ?", &o, &bundled_synonyms()).unwrap();
        assert_eq!(a.intent, "request");
        assert_eq!(a.inform_tags[2], "B-PRICERANGE");
        assert_eq!(a.request_tags[8], "B-PHONE");
    }

    #[test]
    fn bundled_templates_round_trip() {
        use crate::pipeline::templates::TemplateSet;
        let o = DomainOntology::bundled();
        let kb = bundled_kb(&o);
        let n = nlu();
        for record in kb.iter().take(10) {
            for set in [TemplateSet::bundled_system(), TemplateSet::bundled_user()] {
                for key in set.keys() {
                    let (act, rest) = key.split_once('(').unwrap();
                    let names: Vec<&str> = rest.trim_end_matches(')').split(',').filter(|s| !s.is_empty()).collect();
                    let mut frame = SemanticFrame::new(if act == "dontcare" { "inform" } else { act });
                    for name in names {
                        if act == "request" {
                            frame.requests.insert(name.to_string());
                        } else if act == "dontcare" {
                            frame.slots.insert(name.to_string(), DONTCARE.to_string());
                        } else {
                            let v = record.get(name).map(str::to_string).unwrap_or_else(|| o.values(name)[0].clone());
                            frame.slots.insert(name.to_string(), v);
                        }
                    }
                    let text = set.realize(&frame);
                    assert_eq!(n.parse(&text).slots, frame.slots, "{key}: {text:?}");
                }
            }
        }
    }
}
