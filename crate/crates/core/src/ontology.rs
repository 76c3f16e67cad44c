//! Restaurant-domain schema and knowledge base.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Closed value set of the `area` field.
pub const AREAS: [&str; 5] = ["centre", "north", "south", "east", "west"];
/// Closed value set of the `pricerange` field.
pub const PRICE_RANGES: [&str; 3] = ["cheap", "moderate", "expensive"];
/// Acts every ontology must define.
pub const REQUIRED_INTENTS: [&str; 5] = ["greet", "inform", "request", "bye", "thank"];
/// Fields of a [`KbRecord`], in declaration order.
pub const KB_FIELDS: [&str; 7] = ["name", "area", "food", "pricerange", "phone", "address", "postcode"];

const BUNDLED_ONTOLOGY: &str = include_str!("../data/restaurant_ontology.json");

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("{context}: line {line}, column {column}: {message}")]
    Parse {
        context: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid ontology: {0}")]
    Invalid(String),
    #[error("invalid knowledge base record {index} ({name}): {reason}")]
    InvalidRecord {
        index: usize,
        name: String,
        reason: String,
    },
    #[error("unknown constraint slot `{0}`")]
    UnknownSlot(String),
    #[error("knowledge base size must be at least 1")]
    EmptyKb,
}

fn parse_err(context: &str, e: serde_json::Error) -> OntologyError {
    OntologyError::Parse {
        context: context.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainOntology {
    pub intents: Vec<String>,
    pub informable_slots: Vec<String>,
    pub requestable_slots: Vec<String>,
    pub book_slots: Vec<String>,
    /// Slots allowed to appear in more than one role list.
    #[serde(default)]
    pub shared_slots: Vec<String>,
    pub value_lexicon: BTreeMap<String, Vec<String>>,
}

impl DomainOntology {
    /// The restaurant ontology shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_ONTOLOGY).expect("bundled ontology is valid")
    }

    pub fn from_json(json: &str) -> Result<Self, OntologyError> {
        let ontology: DomainOntology =
            serde_json::from_str(json).map_err(|e| parse_err("ontology", e))?;
        ontology.validate()?;
        Ok(ontology)
    }

    pub fn validate(&self) -> Result<(), OntologyError> {
        if self.intents.is_empty() {
            return Err(OntologyError::Invalid("intent list is empty".into()));
        }
        for required in REQUIRED_INTENTS {
            if !self.intents.iter().any(|i| i == required) {
                return Err(OntologyError::Invalid(format!("missing required intent `{required}`")));
            }
        }
        let mut seen_intents = HashSet::new();
        for intent in &self.intents {
            if !seen_intents.insert(intent) {
                return Err(OntologyError::Invalid(format!("duplicate intent `{intent}`")));
            }
        }
        if self.informable_slots.is_empty() {
            return Err(OntologyError::Invalid("no informable slots".into()));
        }

        let shared: BTreeSet<&str> = self.shared_slots.iter().map(String::as_str).collect();
        let roles: [(&str, &Vec<String>); 3] = [
            ("informable", &self.informable_slots),
            ("requestable", &self.requestable_slots),
            ("book", &self.book_slots),
        ];
        let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
        for (role, slots) in roles {
            let mut within = HashSet::new();
            for slot in slots {
                if !within.insert(slot) {
                    return Err(OntologyError::Invalid(format!("slot `{slot}` listed twice in {role} slots")));
                }
                if let Some(prev) = owner.insert(slot, role) {
                    if !shared.contains(slot.as_str()) {
                        return Err(OntologyError::Invalid(format!(
                            "slot `{slot}` appears in both {prev} and {role} slots without a shared-slot declaration"
                        )));
                    }
                }
            }
        }
        for slot in &self.shared_slots {
            if !owner.contains_key(slot.as_str()) {
                return Err(OntologyError::Invalid(format!("shared slot `{slot}` is not declared in any role")));
            }
        }

        let mut value_owner: BTreeMap<String, &str> = BTreeMap::new();
        for (slot, values) in &self.value_lexicon {
            if !owner.contains_key(slot.as_str()) {
                return Err(OntologyError::Invalid(format!("value lexicon names unknown slot `{slot}`")));
            }
            for value in values {
                let key = value.to_lowercase();
                if key.trim().is_empty() {
                    return Err(OntologyError::Invalid(format!("empty value in lexicon of slot `{slot}`")));
                }
                if let Some(prev) = value_owner.insert(key, slot) {
                    return Err(OntologyError::Invalid(format!(
                        "value `{value}` belongs to both `{prev}` and `{slot}` lexicons"
                    )));
                }
            }
        }
        for slot in &self.informable_slots {
            if self.value_lexicon.get(slot).is_none_or(Vec::is_empty) {
                return Err(OntologyError::Invalid(format!("informable slot `{slot}` has no lexicon values")));
            }
        }
        Ok(())
    }

    pub fn is_informable(&self, slot: &str) -> bool {
        self.informable_slots.iter().any(|s| s == slot)
    }

    pub fn is_requestable(&self, slot: &str) -> bool {
        self.requestable_slots.iter().any(|s| s == slot)
    }

    pub fn is_book(&self, slot: &str) -> bool {
        self.book_slots.iter().any(|s| s == slot)
    }

    pub fn has_slot(&self, slot: &str) -> bool {
        self.is_informable(slot) || self.is_requestable(slot) || self.is_book(slot)
    }

    pub fn has_intent(&self, intent: &str) -> bool {
        self.intents.iter().any(|i| i == intent)
    }

    pub fn intent_index(&self, intent: &str) -> Option<usize> {
        self.intents.iter().position(|i| i == intent)
    }

    pub fn values(&self, slot: &str) -> &[String] {
        self.value_lexicon.get(slot).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Returns a copy whose lexicon also contains every value found in `kb`.
    ///
    /// Knowledge-base values that collide with another slot's lexicon are
    /// skipped and logged.
    pub fn with_kb_values(&self, kb: &[KbRecord]) -> DomainOntology {
        let mut out = self.clone();
        let mut value_owner: BTreeMap<String, String> = BTreeMap::new();
        for (slot, values) in &out.value_lexicon {
            for v in values {
                value_owner.insert(v.to_lowercase(), slot.clone());
            }
        }
        for record in kb {
            for field in KB_FIELDS {
                if !out.has_slot(field) {
                    continue;
                }
                let value = record.get(field).expect("known field").to_lowercase();
                match value_owner.get(&value) {
                    Some(owner) if owner == field => {}
                    Some(owner) => {
                        log::warn!("kb value `{value}` of `{field}` already belongs to `{owner}`; skipped")
                    }
                    None => {
                        value_owner.insert(value.clone(), field.to_string());
                        out.value_lexicon.entry(field.to_string()).or_default().push(value);
                    }
                }
            }
        }
        out
    }
}

pub fn load_ontology(path: impl AsRef<Path>) -> Result<DomainOntology, OntologyError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| OntologyError::Io {
        path: path.display().to_string(),
        source,
    })?;
    DomainOntology::from_json(&text).map_err(|e| match e {
        OntologyError::Parse { line, column, message, .. } => OntologyError::Parse {
            context: path.display().to_string(),
            line,
            column,
            message,
        },
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KbRecord {
    pub name: String,
    pub area: String,
    pub food: String,
    pub pricerange: String,
    pub phone: String,
    pub address: String,
    pub postcode: String,
}

impl KbRecord {
    pub fn get(&self, field: &str) -> Option<&str> {
        Some(match field {
            "name" => &self.name,
            "area" => &self.area,
            "food" => &self.food,
            "pricerange" => &self.pricerange,
            "phone" => &self.phone,
            "address" => &self.address,
            "postcode" => &self.postcode,
            _ => return None,
        })
    }

    pub fn matches(&self, constraints: &BTreeMap<String, String>) -> Result<bool, OntologyError> {
        for (slot, value) in constraints {
            let field = self.get(slot).ok_or_else(|| OntologyError::UnknownSlot(slot.clone()))?;
            if field.to_lowercase() != value.to_lowercase() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn check(&self) -> Result<(), String> {
        for field in KB_FIELDS {
            if self.get(field).expect("known field").trim().is_empty() {
                return Err(format!("field `{field}` is empty"));
            }
        }
        if !AREAS.contains(&self.area.to_lowercase().as_str()) {
            return Err(format!("area `{}` outside {:?}", self.area, AREAS));
        }
        if !PRICE_RANGES.contains(&self.pricerange.to_lowercase().as_str()) {
            return Err(format!("pricerange `{}` outside {:?}", self.pricerange, PRICE_RANGES));
        }
        Ok(())
    }
}

/// Checks the per-record invariants and name uniqueness.
pub fn validate_kb(kb: &[KbRecord]) -> Result<(), OntologyError> {
    let mut names = HashSet::new();
    for (index, record) in kb.iter().enumerate() {
        record.check().map_err(|reason| OntologyError::InvalidRecord {
            index,
            name: record.name.clone(),
            reason,
        })?;
        if !names.insert(record.name.to_lowercase()) {
            return Err(OntologyError::InvalidRecord {
                index,
                name: record.name.clone(),
                reason: "duplicate name".into(),
            });
        }
    }
    Ok(())
}

pub fn load_kb(path: impl AsRef<Path>) -> Result<Vec<KbRecord>, OntologyError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| OntologyError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let kb: Vec<KbRecord> =
        serde_json::from_str(&text).map_err(|e| parse_err(&path.display().to_string(), e))?;
    validate_kb(&kb)?;
    Ok(kb)
}

/// Records whose fields equal every constraint (case-insensitive).
pub fn kb_query<'a>(
    kb: &'a [KbRecord],
    constraints: &BTreeMap<String, String>,
) -> Result<Vec<&'a KbRecord>, OntologyError> {
    if let Some(bad) = constraints.keys().find(|k| !KB_FIELDS.contains(&k.as_str())) {
        return Err(OntologyError::UnknownSlot(bad.clone()));
    }
    let mut out = Vec::new();
    for record in kb {
        if record.matches(constraints)? {
            out.push(record);
        }
    }
    Ok(out)
}

const STREETS: [&str; 12] = [
    "regent street",
    "hills road",
    "mill road",
    "king street",
    "bridge street",
    "trumpington street",
    "newmarket road",
    "castle hill",
    "market passage",
    "quayside",
    "chesterton road",
    "lensfield road",
];

/// Deterministically generates `n` records from the ontology lexicon.
///
/// The first 15 records enumerate every area × pricerange pair in a shuffled
/// order; the remainder draw both fields uniformly.
pub fn generate_kb(ontology: &DomainOntology, seed: u64, n: usize) -> Result<Vec<KbRecord>, OntologyError> {
    if n == 0 {
        return Err(OntologyError::EmptyKb);
    }
    let mut rng = crate::stream_rng(seed, 0x6b62);
    let foods = ontology.values("food");
    if foods.is_empty() {
        return Err(OntologyError::Invalid("food lexicon is empty".into()));
    }

    let mut names: Vec<String> = ontology.values("name").to_vec();
    names.shuffle(&mut rng);
    let base = names.len().max(1);
    let mut k = 2;
    while names.len() < n {
        let stem = ontology
            .values("name")
            .get(names.len() % base)
            .cloned()
            .unwrap_or_else(|| "restaurant".to_string());
        let candidate = format!("{stem} {k}");
        if !names.contains(&candidate) {
            names.push(candidate);
        }
        if names.len().is_multiple_of(base) {
            k += 1;
        }
    }

    let mut pairs: Vec<(&str, &str)> = AREAS
        .iter()
        .flat_map(|a| PRICE_RANGES.iter().map(move |p| (*a, *p)))
        .collect();
    pairs.shuffle(&mut rng);

    let mut phones = HashSet::new();
    let mut kb = Vec::with_capacity(n);
    for (i, name) in names.into_iter().take(n).enumerate() {
        let (area, pricerange) = if i < pairs.len() {
            pairs[i]
        } else {
            (
                AREAS[rng.gen_range(0..AREAS.len())],
                PRICE_RANGES[rng.gen_range(0..PRICE_RANGES.len())],
            )
        };
        let food = foods[rng.gen_range(0..foods.len())].clone();
        let phone = loop {
            let p = format!("01223 {:06}", rng.gen_range(0..1_000_000u32));
            if phones.insert(p.clone()) {
                break p;
            }
        };
        let address = format!("{} {}", rng.gen_range(1..200u32), STREETS[rng.gen_range(0..STREETS.len())]);
        let letters = b"abdefghjlnpqrstuwxyz";
        let postcode = format!(
            "cb{} {}{}{}",
            rng.gen_range(1..6u32),
            rng.gen_range(0..10u32),
            letters[rng.gen_range(0..letters.len())] as char,
            letters[rng.gen_range(0..letters.len())] as char
        );
        kb.push(KbRecord {
            name,
            area: area.to_string(),
            food,
            pricerange: pricerange.to_string(),
            phone,
            address,
            postcode,
        });
    }
    Ok(kb)
}

/// The default desk-scale knowledge base: 50 records, seed 7.
pub fn bundled_kb(ontology: &DomainOntology) -> Vec<KbRecord> {
    generate_kb(ontology, 7, 50).expect("n > 0")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constraints(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn bundled_informables_match_inform_rows() {
        let o = DomainOntology::bundled();
        let informable: BTreeSet<&str> = o.informable_slots.iter().map(String::as_str).collect();
        assert_eq!(informable, ["area", "food", "name", "pricerange"].into_iter().collect());
        assert!(o.is_requestable("food") && o.is_informable("food"));
        for s in ["phone", "address", "postcode"] {
            assert!(o.is_requestable(s));
        }
    }

    #[test]
    fn undeclared_overlap_is_rejected() {
        let mut o = DomainOntology::bundled();
        o.book_slots.push("area".into());
        let err = o.validate().unwrap_err().to_string();
        assert!(err.contains("area"), "{err}");
        o.shared_slots.push("area".into());
        o.validate().unwrap();
    }

    #[test]
    fn empty_intents_rejected() {
        let mut o = DomainOntology::bundled();
        o.intents.clear();
        assert!(o.validate().is_err());
    }

    #[test]
    fn value_in_two_lexicons_rejected() {
        let mut o = DomainOntology::bundled();
        o.value_lexicon.get_mut("food").unwrap().push("north".into());
        let err = o.validate().unwrap_err().to_string();
        assert!(err.contains("north"), "{err}");
    }

    #[test]
    fn parse_error_carries_position() {
        let err = DomainOntology::from_json("{\n  \"intents\": [\n  oops").unwrap_err();
        match err {
            OntologyError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_constraints_return_everything() {
        let o = DomainOntology::bundled();
        let kb = generate_kb(&o, 7, 50).unwrap();
        assert_eq!(kb_query(&kb, &BTreeMap::new()).unwrap().len(), 50);
    }

    #[test]
    fn query_matches_linear_scan() {
        let o = DomainOntology::bundled();
        let kb = generate_kb(&o, 7, 50).unwrap();
        let c = constraints(&[("area", "north"), ("pricerange", "cheap")]);
        let got: Vec<&str> = kb_query(&kb, &c).unwrap().iter().map(|r| r.name.as_str()).collect();
        let mut expected = Vec::new();
        for r in &kb {
            if r.area == "north" && r.pricerange == "cheap" {
                expected.push(r.name.as_str());
            }
        }
        assert!(!expected.is_empty());
        assert_eq!(got, expected);
    }

    #[test]
    fn query_is_case_insensitive() {
        let o = DomainOntology::bundled();
        let kb = generate_kb(&o, 7, 50).unwrap();
        let lower = kb_query(&kb, &constraints(&[("area", "north")])).unwrap().len();
        let upper = kb_query(&kb, &constraints(&[("area", "NORTH")])).unwrap().len();
        assert_eq!(lower, upper);
    }

    #[test]
    fn unknown_value_and_slot() {
        let o = DomainOntology::bundled();
        let kb = generate_kb(&o, 7, 50).unwrap();
        assert!(kb_query(&kb, &constraints(&[("area", "atlantis")])).unwrap().is_empty());
        assert!(matches!(
            kb_query(&kb, &constraints(&[("stars", "5")])),
            Err(OntologyError::UnknownSlot(_))
        ));
    }

    #[test]
    fn generation_is_deterministic_and_seeded() {
        let o = DomainOntology::bundled();
        let a = serde_json::to_string(&generate_kb(&o, 7, 50).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_kb(&o, 7, 50).unwrap()).unwrap();
        let c = serde_json::to_string(&generate_kb(&o, 8, 50).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn fifteen_records_cover_all_pairs() {
        let o = DomainOntology::bundled();
        let kb = generate_kb(&o, 7, 15).unwrap();
        let pairs: BTreeSet<(String, String)> =
            kb.iter().map(|r| (r.area.clone(), r.pricerange.clone())).collect();
        assert_eq!(pairs.len(), 15);
    }

    #[test]
    fn zero_records_is_an_error() {
        assert!(matches!(
            generate_kb(&DomainOntology::bundled(), 1, 0),
            Err(OntologyError::EmptyKb)
        ));
    }

    #[test]
    fn large_kb_has_unique_names() {
        let o = DomainOntology::bundled();
        let kb = generate_kb(&o, 3, 180).unwrap();
        validate_kb(&kb).unwrap();
    }

    #[test]
    fn duplicate_names_fail_validation() {
        let o = DomainOntology::bundled();
        let mut kb = generate_kb(&o, 3, 4).unwrap();
        kb[1].name = kb[0].name.clone();
        assert!(validate_kb(&kb).is_err());
    }

    #[test]
    fn kb_values_extend_lexicon() {
        let o = DomainOntology::bundled();
        let kb = generate_kb(&o, 7, 10).unwrap();
        let ext = o.with_kb_values(&kb);
        assert!(ext.values("phone").contains(&kb[0].phone));
        ext.validate().unwrap();
    }
}
