//! Runs a short study and a short training run, then renders both as
//! markdown and CSV tables.

use dialoforge::dialogue::{train_dm, DialogueEnv, TrainConfig};
use dialoforge::hpo::objectives::{quadratic, quadratic_space};
use dialoforge::hpo::{run_study, StudyOptions};
use dialoforge::report::{importance_table, study_trials, training_curves, training_summary};
use dialoforge::{AgentHyperParams, Variant};

fn main() -> anyhow::Result<()> {
    let study = run_study(quadratic_space(), &quadratic, &StudyOptions { n_trials: 12, ..Default::default() })?;
    println!("{}", study_trials(&study).to_markdown());
    println!("{}", importance_table(&study)?.to_markdown());

    let env = DialogueEnv::bundled();
    let config = TrainConfig { episodes: 200, measure_every: 50, ..Default::default() };
    let (_, report) = train_dm(&env, Variant::Ddqn, AgentHyperParams::reported(Variant::Ddqn), &config, |_| true)?;
    let reports = [report];
    println!("{}", training_summary(&reports).to_markdown());
    print!("{}", training_curves(&reports).to_csv()?);
    Ok(())
}
