//! Runs corpus preparation over simulated multi-domain dialogues and shows
//! one annotated user turn and one serialised system turn.
//!
//! ```text
//! cargo run --example prepare_corpus -- [dialogues] [out_dir]
//! ```

use dialoforge::corpus::{bundled_act_mapping, bundled_synonyms, generate_corpus, prepare_corpus, SynthConfig};
use dialoforge::DialogueEnv;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(100);
    let env = DialogueEnv::bundled();
    let raw = generate_corpus(&env, &SynthConfig { dialogues: n, ..Default::default() })?;
    let out = prepare_corpus(&raw, &bundled_act_mapping(), &env.ontology, &bundled_synonyms(), 0)?;
    println!("{}", serde_json::to_string_pretty(&out.summary)?);

    if let Some(u) = out.nlu_train.first() {
        println!("\nintent: {}", u.intent);
        for ((tok, inf), req) in u.tokens.iter().zip(&u.inform_tags).zip(&u.request_tags) {
            println!("  {tok:<14} {inf:<16} {req}");
        }
    }
    if let Some(line) = out.nlg_train.first() {
        println!("\n{line}");
    }
    if let Some(dir) = args.next() {
        out.write_to(&dir)?;
        println!("\nwrote {dir}");
    }
    Ok(())
}
