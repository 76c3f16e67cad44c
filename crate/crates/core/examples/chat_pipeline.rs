//! Wires the full pipeline (template NLU, rule dialogue manager, template
//! NLG) and lets the simulated user talk to it through the user templates.

use dialoforge::corpus::bundled_synonyms;
use dialoforge::dialogue::RulePolicy;
use dialoforge::pipeline::chat::{run_scripted, ChatSession};
use dialoforge::pipeline::{TemplateNlu, TemplateSet};
use dialoforge::{stream_rng, DialogueEnv};

fn main() -> anyhow::Result<()> {
    let env = DialogueEnv::bundled();
    let nlu = TemplateNlu::with_kb(&env.ontology, &env.kb, &bundled_synonyms());
    let mut session = ChatSession::new(
        &env,
        Box::new(RulePolicy::new(&env.ontology)),
        Box::new(nlu),
        Box::new(TemplateSet::bundled_system()),
    );
    let mut rng = stream_rng(5, 0);
    let mut user = TemplateSet::bundled_user();
    let mut met = 0;
    for i in 0..20 {
        session.reset();
        let goal = env.sample_goal(&mut rng)?;
        run_scripted(&mut session, goal, &mut user, &mut rng)?;
        met += usize::from(session.goal_status().is_some_and(|s| s.complete()));
        if i == 0 {
            for t in session.transcript() {
                println!("{:?}: {}", t.speaker, t.utterance.as_deref().unwrap_or(""));
            }
            println!();
        }
    }
    println!("goals met in {met}/20 text-level conversations");
    Ok(())
}
