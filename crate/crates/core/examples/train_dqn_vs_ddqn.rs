//! Trains DQN and DDQN with their reported best hyperparameters on the bundled
//! knowledge base and compares final greedy performance over several seeds.
//!
//! ```text
//! cargo run --release --example train_dqn_vs_ddqn -- [episodes] [seeds]
//! ```

use dialoforge::dialogue::{train_dm, DialogueEnv, TrainConfig, TrainingReport};
use dialoforge::{AgentHyperParams, Variant};

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let episodes: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(2000);
    let seeds: u64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(3);
    let env = DialogueEnv::bundled();
    println!(
        "state dim {}, {} actions, {} KB records",
        env.state_dim(),
        env.n_actions(),
        env.kb.len()
    );

    let jobs: Vec<(Variant, u64)> = [Variant::Dqn, Variant::Ddqn]
        .into_iter()
        .flat_map(|v| (0..seeds).map(move |s| (v, s)))
        .collect();
    let reports: Vec<TrainingReport> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(variant, seed)| {
                let env = &env;
                scope.spawn(move || {
                    let config = TrainConfig {
                        episodes,
                        measure_every: (episodes / 2).clamp(1, 1000),
                        seed,
                        ..Default::default()
                    };
                    train_dm(env, variant, AgentHyperParams::reported(variant), &config, |_| true).map(|(_, r)| r)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect::<Result<_, _>>()
    })?;

    println!("{:<6} {:>4} {:>9} {:>9} {:>9}   windows (success / turns)", "algo", "seed", "success", "reward", "turns");
    for r in &reports {
        let series: Vec<String> = r
            .windows
            .iter()
            .map(|w| format!("{:.2}/{:.1}", w.success_rate, w.avg_turns))
            .collect();
        println!(
            "{:<6} {:>4} {:>9.3} {:>9.3} {:>9.3}   {}",
            r.variant.to_string(),
            r.seed,
            r.final_eval.success_rate,
            r.final_eval.avg_reward,
            r.final_eval.avg_turns,
            series.join("  ")
        );
    }
    for variant in [Variant::Dqn, Variant::Ddqn] {
        let rs: Vec<&TrainingReport> = reports.iter().filter(|r| r.variant == variant).collect();
        let n = rs.len() as f64;
        println!(
            "{variant:<6} mean  success {:.3}  reward {:.3}  turns {:.3}",
            rs.iter().map(|r| r.final_eval.success_rate).sum::<f64>() / n,
            rs.iter().map(|r| r.final_eval.avg_reward).sum::<f64>() / n,
            rs.iter().map(|r| r.final_eval.avg_turns).sum::<f64>() / n,
        );
    }
    Ok(())
}
