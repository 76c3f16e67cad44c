//! Act mapping, annotation and preparation over whole corpora.

use std::collections::BTreeMap;

use dialoforge::corpus::{
    annotate_bio, bundled_act_mapping, bundled_synonyms, check_bio, generate_corpus, load_dialogues, map_act_types,
    parse_dialogues, parse_pair, prepare_corpus, AnnotatedUtterance, SynthConfig,
};
use dialoforge::{DialogueEnv, DomainOntology};

const MULTI_DOMAIN: &str = r#"[
  {"dialogue_id": "mul-1", "services": ["restaurant", "hotel"], "turns": [
    {"speaker": 0, "utterance": "i need a cheap place to eat in the centre",
     "dialogue_acts": [{"act_type": "Restaurant-Inform", "slots": {"pricerange": "cheap", "area": "centre"}}],
     "span_info": [{"act_type": "Restaurant-Inform", "slot": "pricerange", "value": "cheap", "start": 9, "end": 14},
                   {"act_type": "Restaurant-Inform", "slot": "area", "value": "centre", "start": 35, "end": 41}]},
    {"speaker": 1, "utterance": "what type of food would you like ?",
     "dialogue_acts": [{"act_type": "Restaurant-Request", "slots": {"food": "?"}}]},
    {"speaker": 0, "utterance": "also a hotel with free parking",
     "dialogue_acts": [{"act_type": "Hotel-Inform", "slots": {"parking": "yes"}}]},
    {"speaker": 1, "utterance": "the gardenia is a nice cheap restaurant in the centre",
     "dialogue_acts": [{"act_type": "Restaurant-Recommend", "slots": {"name": "the gardenia", "pricerange": "cheap", "area": "centre"}}]}
  ]},
  {"dialogue_id": "sng-2", "services": ["train"], "turns": [
    {"speaker": 0, "utterance": "a train to london please", "dialogue_acts": [{"act_type": "Train-Inform", "slots": {"dest": "london"}}]}
  ]}
]"#;

#[test]
fn act_mapping_golden() {
    let dialogues = parse_dialogues(MULTI_DOMAIN).unwrap();
    let mapping = bundled_act_mapping();
    let mapped = map_act_types(&dialogues[0], &mapping).unwrap();
    let acts: Vec<&str> = mapped.turns.iter().flat_map(|t| &t.dialogue_acts).map(|a| a.act_type.as_str()).collect();
    assert_eq!(acts, ["Inform", "Request", "Inform", "Recommend"]);
    // span entries are renamed in place, offsets and text untouched
    for (before, after) in dialogues[0].turns[0].span_info.iter().zip(&mapped.turns[0].span_info) {
        assert_eq!(after.act_type, "Inform");
        assert_eq!((after.start, after.end, &after.value), (before.start, before.end, &before.value));
    }
    assert_eq!(mapped.turns[0].utterance, dialogues[0].turns[0].utterance);
}

#[test]
fn annotation_golden() {
    let o = DomainOntology::bundled();
    let syn = bundled_synonyms();
    let slots = |p: &[(&str, &str)]| p.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect::<BTreeMap<_, _>>();
    let (a, w) = annotate_bio(
        "i want a moderately priced restaurant in the west",
        "inform",
        &slots(&[("pricerange", "moderate"), ("area", "west")]),
        &o,
        &syn,
    )
    .unwrap();
    assert!(w.is_empty());
    assert_eq!(a.inform_tags, ["O", "O", "O", "B-PRICERANGE", "I-PRICERANGE", "O", "O", "O", "B-AREA"]);
    assert!(a.request_tags.iter().all(|t| t == "O"));
    let (b, _) = annotate_bio("what is the address and postcode ?", "request", &slots(&[("address", "?"), ("postcode", "?")]), &o, &syn).unwrap();
    assert_eq!(b.request_tags, ["O", "O", "O", "B-ADDRESS", "O", "B-POSTCODE", "O"]);
}

#[test]
fn preparation_keeps_restaurant_turns_only() {
    let o = DomainOntology::bundled();
    let out = prepare_corpus(&parse_dialogues(MULTI_DOMAIN).unwrap(), &bundled_act_mapping(), &o, &bundled_synonyms(), 0).unwrap();
    assert_eq!(out.summary.dialogues_in, 2);
    assert_eq!(out.summary.restaurant_dialogues, 1);
    // the hotel turn carries no restaurant act
    assert_eq!(out.summary.nlu_examples, 1);
    assert_eq!(out.summary.nlg_pairs, 2);
    let all: Vec<&AnnotatedUtterance> = out.nlu_train.iter().chain(&out.nlu_test).collect();
    assert_eq!(all[0].inform_tags.iter().filter(|t| t.starts_with("B-")).count(), 2);
}

#[test]
fn bio_invariant_over_full_synthetic_corpus() {
    let env = DialogueEnv::bundled();
    let config = SynthConfig {
        dialogues: 1000,
        synonym_rate: 0.5,
        ..Default::default()
    };
    let raw = generate_corpus(&env, &config).unwrap();
    let out = prepare_corpus(&raw, &bundled_act_mapping(), &env.ontology, &bundled_synonyms(), 1).unwrap();
    assert!(out.summary.nlu_examples > 3000, "{:?}", out.summary);
    for u in out.nlu_train.iter().chain(&out.nlu_test) {
        assert_eq!(u.tokens.len(), u.inform_tags.len());
        assert_eq!(u.tokens.len(), u.request_tags.len());
        check_bio(&u.inform_tags).unwrap();
        check_bio(&u.request_tags).unwrap();
    }
    for line in out.nlg_train.iter().chain(&out.nlg_test) {
        let (frames, utterance) = parse_pair(line).unwrap();
        assert!(!frames.is_empty() && !utterance.is_empty());
    }
    assert_eq!(out.summary.annotation_warnings, 0);
}

#[test]
fn prepared_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("dialogues.json");
    std::fs::write(&input, MULTI_DOMAIN).unwrap();
    let o = DomainOntology::bundled();
    let out = prepare_corpus(&load_dialogues(&input).unwrap(), &bundled_act_mapping(), &o, &bundled_synonyms(), 0).unwrap();
    out.write_to(dir.path().join("out")).unwrap();
    let read = |name: &str| std::fs::read_to_string(dir.path().join("out").join(name)).unwrap();
    let nlu: Vec<AnnotatedUtterance> = read("nlu_train.jsonl")
        .lines()
        .chain(read("nlu_test.jsonl").lines())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(nlu.len(), 1);
    assert_eq!(read("nlg_train.txt").lines().count() + read("nlg_test.txt").lines().count(), 2);
}
