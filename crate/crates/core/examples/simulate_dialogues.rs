//! Rolls out the rule policy and a random policy against the user simulator
//! and prints one rule-policy transcript.

use dialoforge::dialogue::{evaluate_with, RandomPolicy, RulePolicy};
use dialoforge::{stream_rng, DialogueEnv};

fn main() -> anyhow::Result<()> {
    let env = DialogueEnv::bundled();
    let mut rng = stream_rng(3, 0);
    let goal = env.sample_goal(&mut rng)?;
    println!("goal: inform {:?}, request {:?}", goal.inform, goal.request);
    let episode = env.rollout(goal, &mut RulePolicy::new(&env.ontology), &mut rng)?;
    for t in &episode.transcript {
        println!("  {:>2} {:?}: {}", t.turn, t.speaker, t.frame);
    }
    println!("success {}, {} turns, return {}\n", episode.success, episode.turns, episode.cumulative_reward);

    let rule = evaluate_with(&env, &mut RulePolicy::new(&env.ontology), 500, 11)?;
    let mut random = RandomPolicy { n_actions: env.n_actions(), rng: stream_rng(11, 1) };
    let random = evaluate_with(&env, &mut random, 500, 11)?;
    for (name, s) in [("rule", rule), ("random", random)] {
        println!(
            "{name:<7} success {:.3}  reward {:>7.2}  turns {:.2}",
            s.success_rate, s.avg_reward, s.avg_turns
        );
    }
    Ok(())
}
