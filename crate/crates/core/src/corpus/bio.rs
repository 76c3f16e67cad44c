use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::ontology::DomainOntology;
use crate::simulator::DONTCARE;
use crate::text::{find_span, tokenize};

/// Sentinel value marking a requested slot.
pub const REQUEST_SENTINEL: &str = "?";

/// slot → value → alternative surface forms. The value `"?"` lists the
/// phrasings of the slot's name used when it is requested.
pub type SynonymTable = BTreeMap<String, BTreeMap<String, Vec<String>>>;

const BUNDLED_SYNONYMS: &str = include_str!("../../data/synonyms.json");

pub fn bundled_synonyms() -> SynonymTable {
    serde_json::from_str(BUNDLED_SYNONYMS).expect("bundled synonym table is valid JSON")
}

pub fn load_synonyms(path: impl AsRef<Path>) -> Result<SynonymTable, CorpusError> {
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

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedUtterance {
    pub tokens: Vec<String>,
    pub intent: String,
    pub inform_tags: Vec<String>,
    pub request_tags: Vec<String>,
}

/// A slot whose value (or name, for requests) was not located in the text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationWarning {
    pub slot: String,
    pub value: String,
    pub utterance: String,
    pub reason: String,
}

fn surface_forms(slot: &str, value: &str, synonyms: &SynonymTable) -> Vec<Vec<String>> {
    let primary = if value == REQUEST_SENTINEL {
        tokenize(slot)
    } else {
        tokenize(value)
    };
    let extra = synonyms.get(slot).and_then(|m| m.get(value)).into_iter().flatten();
    std::iter::once(primary)
        .chain(extra.map(|s| tokenize(s)))
        .filter(|t| !t.is_empty())
        .collect()
}

fn tag_span(tags: &mut [String], start: usize, len: usize, slot: &str) {
    let upper = slot.to_uppercase();
    tags[start] = format!("B-{upper}");
    for t in &mut tags[start + 1..start + len] {
        *t = format!("I-{upper}");
    }
}

/// BIO-tags `utterance` for the given slots.
///
/// Inform values are searched as written, then through the synonym table;
/// requested slots (value `"?"`) are searched by name, then by their `"?"`
/// synonyms. The first occurrence not already tagged in the same channel wins.
/// `dontcare` values have no surface form and are skipped.
pub fn annotate_bio(
    utterance: &str,
    intent: &str,
    slots: &BTreeMap<String, String>,
    ontology: &DomainOntology,
    synonyms: &SynonymTable,
) -> Result<(AnnotatedUtterance, Vec<AnnotationWarning>), CorpusError> {
    let tokens = tokenize(utterance);
    let mut inform_tags = vec!["O".to_string(); tokens.len()];
    let mut request_tags = vec!["O".to_string(); tokens.len()];
    let mut warnings = Vec::new();
    for (slot, value) in slots {
        if !ontology.has_slot(slot) {
            return Err(CorpusError::UnknownSlot(slot.clone()));
        }
        if value == DONTCARE {
            continue;
        }
        let tags = if value == REQUEST_SENTINEL {
            &mut request_tags
        } else {
            &mut inform_tags
        };
        let forms = surface_forms(slot, value, synonyms);
        let mut collided = false;
        let found = forms.iter().find_map(|form| {
            let hit = find_span(&tokens, form, |r| tags[r].iter().all(|t| t == "O"));
            if hit.is_none() && find_span(&tokens, form, |_| true).is_some() {
                collided = true;
            }
            hit.map(|s| (s, form.len()))
        });
        match found {
            Some((start, len)) => tag_span(tags, start, len, slot),
            None => {
                let reason = if collided {
                    "every occurrence overlaps an earlier slot".to_string()
                } else {
                    "no surface form found".to_string()
                };
                log::warn!("annotate: {slot}={value} in {utterance:?}: {reason}");
                warnings.push(AnnotationWarning {
                    slot: slot.clone(),
                    value: value.clone(),
                    utterance: utterance.to_string(),
                    reason,
                });
            }
        }
    }
    Ok((
        AnnotatedUtterance {
            tokens,
            intent: intent.to_string(),
            inform_tags,
            request_tags,
        },
        warnings,
    ))
}

/// Checks tag syntax and that every `I-X` continues a `B-X` or `I-X`.
pub fn check_bio(tags: &[String]) -> Result<(), String> {
    let mut open: Option<&str> = None;
    for (i, tag) in tags.iter().enumerate() {
        if tag == "O" {
            open = None;
        } else if let Some(slot) = tag.strip_prefix("B-").filter(|s| !s.is_empty()) {
            open = Some(slot);
        } else if let Some(slot) = tag.strip_prefix("I-").filter(|s| !s.is_empty()) {
            if open != Some(slot) {
                return Err(format!("tag {i} `{tag}` does not continue a span of the same slot"));
            }
        } else {
            return Err(format!("tag {i} `{tag}` is not O, B-SLOT or I-SLOT"));
        }
    }
    Ok(())
}

/// Recovers `(SLOT, surface text)` spans from a tag sequence.
pub fn decode_spans(tokens: &[String], tags: &[String]) -> Vec<(String, String)> {
    let mut spans: Vec<(String, Vec<&str>)> = Vec::new();
    for (tok, tag) in tokens.iter().zip(tags) {
        if let Some(slot) = tag.strip_prefix("B-") {
            spans.push((slot.to_string(), vec![tok]));
        } else if let Some(slot) = tag.strip_prefix("I-") {
            match spans.last_mut() {
                Some((s, words)) if s == slot => words.push(tok),
                _ => spans.push((slot.to_string(), vec![tok])),
            }
        }
    }
    spans.into_iter().map(|(s, w)| (s, w.join(" "))).collect()
}

impl AnnotatedUtterance {
    pub fn validate(&self) -> Result<(), String> {
        if self.inform_tags.len() != self.tokens.len() || self.request_tags.len() != self.tokens.len() {
            return Err(format!(
                "{} tokens but {} inform / {} request tags",
                self.tokens.len(),
                self.inform_tags.len(),
                self.request_tags.len()
            ));
        }
        check_bio(&self.inform_tags)?;
        check_bio(&self.request_tags)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slots(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    fn run(text: &str, intent: &str, s: &[(&str, &str)]) -> (AnnotatedUtterance, Vec<AnnotationWarning>) {
        annotate_bio(text, intent, &slots(s), &DomainOntology::bundled(), &bundled_synonyms()).unwrap()
    }

    #[test]
    fn moderately_priced_synonym() {
        let (a, w) = run("i want a moderately priced restaurant", "inform", &[("pricerange", "moderate")]);
        assert!(w.is_empty());
        assert_eq!(
            a.inform_tags,
            vec!["O", "O", "O", "B-PRICERANGE", "I-PRICERANGE", "O"]
        );
        assert!(a.request_tags.iter().all(|t| t == "O"));
    }

    #[test]
    fn greeting_is_all_o() {
        let (a, w) = run("hello", "greet", &[]);
        assert_eq!((a.inform_tags, a.request_tags, w.len()), (vec!["O".to_string()], vec!["O".to_string()], 0));
    }

    #[test]
    fn request_by_slot_name() {
        let (a, _) = run("what is the phone number", "request", &[("phone", "?")]);
        assert_eq!(a.request_tags, vec!["O", "O", "O", "B-PHONE", "O"]);
        let (b, _) = run("what is the price range ?", "request", &[("pricerange", "?")]);
        assert_eq!(b.request_tags, vec!["O", "O", "O", "B-PRICERANGE", "I-PRICERANGE", "O"]);
    }

    #[test]
    fn missing_value_degrades_to_warning() {
        let (a, w) = run("somewhere nice please", "inform", &[("area", "north")]);
        assert!(a.inform_tags.iter().all(|t| t == "O"));
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].slot, "area");
    }

    #[test]
    fn unknown_slot_is_an_error() {
        let r = annotate_bio("x", "inform", &slots(&[("colour", "red")]), &DomainOntology::bundled(), &bundled_synonyms());
        assert!(matches!(r, Err(CorpusError::UnknownSlot(_))));
    }

    #[test]
    fn collisions_first_match_wins() {
        // `name` claims "british" first (BTreeMap order: food < name), so name
        // falls through to its second occurrence.
        let (a, w) = run("british food at the british", "inform", &[("food", "british"), ("name", "british")]);
        assert!(w.is_empty());
        assert_eq!(a.inform_tags, vec!["B-FOOD", "O", "O", "O", "B-NAME"]);
        let (b, w) = run("british food", "inform", &[("food", "british"), ("name", "british")]);
        assert_eq!(b.inform_tags, vec!["B-FOOD", "O"]);
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn spans_decode_back() {
        let (a, _) = run(
            "a moderately priced place in the north , what is the post code ?",
            "inform",
            &[("pricerange", "moderate"), ("area", "north"), ("postcode", "?")],
        );
        a.validate().unwrap();
        assert_eq!(
            decode_spans(&a.tokens, &a.inform_tags),
            vec![("PRICERANGE".into(), "moderately priced".into()), ("AREA".into(), "north".into())]
        );
        assert_eq!(decode_spans(&a.tokens, &a.request_tags), vec![("POSTCODE".into(), "post code".into())]);
    }

    #[test]
    fn bio_checker() {
        let t = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert!(check_bio(&t(&["O", "B-A", "I-A", "B-B"])).is_ok());
        assert!(check_bio(&t(&["O", "I-A"])).is_err());
        assert!(check_bio(&t(&["B-A", "I-B"])).is_err());
        assert!(check_bio(&t(&["X"])).is_err());
    }
}
