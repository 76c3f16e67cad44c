//! TPE against random search on a 1-D quadratic, plus pruning and
//! importance on synthetic objectives.
//!
//! cargo run --release --example hpo_benchmark

use dialoforge::hpo::objectives::{active_only, params, quadratic, quadratic_space, staircase_space, two_param_space, Staircase};
use dialoforge::hpo::{param_importance, run_study, SamplerKind, Study, StudyOptions, TrialStatus};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn main() -> anyhow::Result<()> {
    let reps = 20u64;
    let best = |sampler| -> anyhow::Result<(Vec<f64>, usize)> {
        let mut values = Vec::new();
        let mut located = 0;
        for seed in 0..reps {
            let opts = StudyOptions {
                n_trials: 20,
                sampler,
                seed,
                pruner: None,
                ..Default::default()
            };
            let s = run_study(quadratic_space(), &quadratic, &opts)?;
            let b = s.best_trial().expect("complete trials");
            let x = b.params["x"].as_f64().unwrap_or(f64::NAN);
            located += usize::from((x - 0.3).abs() < 0.1);
            values.push(b.value.unwrap_or(f64::NEG_INFINITY));
        }
        Ok((values, located))
    };
    let (tpe, tpe_located) = best(SamplerKind::Tpe)?;
    let (random, random_located) = best(SamplerKind::Random)?;
    println!("sampler  median-best      located/{reps}");
    println!("tpe      {:<16.3e} {tpe_located}", median(tpe));
    println!("random   {:<16.3e} {random_located}", median(random));

    let mut stairs = Study::new(staircase_space(), SamplerKind::Random, 0);
    for level in [0.9, 0.8, 0.7, 0.05] {
        stairs.enqueue(params(&[("level", level.into())]))?;
    }
    stairs.optimize(&Staircase { steps: 5 }, 4, 1)?;
    let bad = &stairs.trials()[3];
    println!(
        "staircase: bad trial {:?} after step {:?} of 5",
        bad.status,
        bad.last_step()
    );
    assert_eq!(bad.status, TrialStatus::Pruned);

    let opts = StudyOptions {
        n_trials: 40,
        sampler: SamplerKind::Random,
        ..Default::default()
    };
    let s = run_study(two_param_space(), &active_only, &opts)?;
    for (name, score) in param_importance(&s)? {
        println!("importance {name:<8} {score:.3}");
    }
    Ok(())
}
