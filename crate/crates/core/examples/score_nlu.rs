//! Tags held-out user turns with the template parser and scores the tags
//! against the corpus annotation, per tag and overall.

use dialoforge::corpus::{bundled_act_mapping, bundled_synonyms, generate_corpus, prepare_corpus, SynthConfig};
use dialoforge::metrics::{score_nlu, NluExample};
use dialoforge::pipeline::TemplateNlu;
use dialoforge::report::nlu_table;
use dialoforge::DialogueEnv;

fn example(intent: String, inform_tags: Vec<String>, request_tags: Vec<String>) -> NluExample {
    NluExample { intent, inform_tags, request_tags }
}

fn main() -> anyhow::Result<()> {
    let env = DialogueEnv::bundled();
    let syn = bundled_synonyms();
    let config = SynthConfig { dialogues: 150, synonym_rate: 0.5, ..Default::default() };
    let prep = prepare_corpus(&generate_corpus(&env, &config)?, &bundled_act_mapping(), &env.ontology, &syn, 0)?;

    let nlu = TemplateNlu::new(&env.ontology, &syn);
    let mut pred = Vec::new();
    let mut gold = Vec::new();
    for u in &prep.nlu_test {
        let p = nlu.tag(&u.tokens.join(" "), &env.ontology, &syn)?;
        pred.push(example(p.intent, p.inform_tags, p.request_tags));
        gold.push(example(u.intent.clone(), u.inform_tags.clone(), u.request_tags.clone()));
    }
    let scores = score_nlu(&pred, &gold)?;
    println!("{} test utterances\n", gold.len());
    println!("{}", nlu_table(&scores).to_markdown());
    Ok(())
}
