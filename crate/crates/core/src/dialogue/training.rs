use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::episode::{DialogueEnv, Episode, EpisodeResult, GreedyPolicy, Policy, RulePolicy};
use super::{DialogueError, RewardConfig};
use crate::agent::{AgentHyperParams, QAgent, Variant};
use crate::simulator::UserGoal;
use crate::{mix_seed, stream_rng};

const STREAM_INIT: u64 = 1;
const STREAM_AGENT: u64 = 2;
const STREAM_WARMUP: u64 = 3;
const STREAM_TRAIN: u64 = 4;
const STREAM_EVAL: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub episodes: usize,
    pub measure_every: usize,
    pub seed: u64,
    /// Rule-agent transitions loaded into replay before training.
    pub warmup_transitions: usize,
    /// Greedy episodes run at the end of each window (0 disables).
    pub interim_eval_episodes: usize,
    pub eval_episodes: usize,
    /// Seed for evaluation goals; defaults to `seed`.
    pub eval_seed: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 10_000,
            measure_every: 1_000,
            seed: 0,
            warmup_transitions: 1_000,
            interim_eval_episodes: 100,
            eval_episodes: 500,
            eval_seed: None,
        }
    }
}

impl TrainConfig {
    pub fn eval_seed(&self) -> u64 {
        self.eval_seed.unwrap_or(self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalStats {
    pub success_rate: f64,
    pub avg_reward: f64,
    pub avg_turns: f64,
    pub episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    /// Training episodes completed at the end of this window.
    pub end_episode: usize,
    pub episodes: usize,
    pub success_rate: f64,
    pub avg_reward: f64,
    pub avg_turns: f64,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub variant: Variant,
    pub hyper: AgentHyperParams,
    pub seed: u64,
    pub episodes: usize,
    pub measure_every: usize,
    pub state_dim: usize,
    pub n_actions: usize,
    pub reward: RewardConfig,
    pub warmup_transitions: usize,
    pub eval_seed: u64,
    pub windows: Vec<WindowStats>,
    /// Greedy evaluation of the final policy over `final_eval.episodes` goals.
    pub final_eval: EvalStats,
    pub stopped_early: bool,
}

impl TrainingReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "end_episode,success_rate,avg_reward,avg_turns,epsilon,eval_success_rate,eval_avg_reward,eval_avg_turns\n",
        );
        for w in &self.windows {
            let (s, r, t) = w
                .eval
                .map(|e| (e.success_rate.to_string(), e.avg_reward.to_string(), e.avg_turns.to_string()))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{s},{r},{t}",
                w.end_episode, w.success_rate, w.avg_reward, w.avg_turns, w.epsilon
            );
        }
        out
    }
}

/// Means over a set of finished episodes.
pub fn summarize(results: &[EpisodeResult]) -> EvalStats {
    let n = results.len().max(1) as f64;
    EvalStats {
        success_rate: results.iter().filter(|r| r.success).count() as f64 / n,
        avg_reward: results.iter().map(|r| r.cumulative_reward).sum::<f64>() / n,
        avg_turns: results.iter().map(|r| r.turns as f64).sum::<f64>() / n,
        episodes: results.len(),
    }
}

/// Goal and simulator stream for evaluation episode `i`; identical for every policy.
fn eval_rng(seed: u64, i: usize) -> crate::SeededRng {
    stream_rng(mix_seed(seed, STREAM_EVAL), i as u64)
}

pub fn evaluate_episodes<P: Policy + ?Sized>(
    env: &DialogueEnv,
    policy: &mut P,
    n_episodes: usize,
    seed: u64,
) -> Result<Vec<EpisodeResult>, DialogueError> {
    if n_episodes == 0 {
        return Err(DialogueError::Config("n_episodes must be at least 1".into()));
    }
    (0..n_episodes)
        .map(|i| {
            let mut rng = eval_rng(seed, i);
            let goal = env.sample_goal(&mut rng)?;
            env.rollout(goal, policy, &mut rng)
        })
        .collect()
}

pub fn evaluate_with<P: Policy + ?Sized>(
    env: &DialogueEnv,
    policy: &mut P,
    n_episodes: usize,
    seed: u64,
) -> Result<EvalStats, DialogueError> {
    Ok(summarize(&evaluate_episodes(env, policy, n_episodes, seed)?))
}

/// Greedy rollouts of `agent` on `n_episodes` seeded goals.
pub fn evaluate_policy(env: &DialogueEnv, agent: &QAgent, n_episodes: usize, seed: u64) -> Result<EvalStats, DialogueError> {
    env.check_agent(agent)?;
    evaluate_with(env, &mut GreedyPolicy(agent), n_episodes, seed)
}

/// One conversation. With `learn`, actions are epsilon-greedy, every
/// transition is stored, one batch is trained per agent turn once replay
/// holds a batch, and the episode counts toward target syncing. Without it
/// the agent is only read.
pub fn run_episode<R: Rng + ?Sized, A: Rng + ?Sized>(
    env: &DialogueEnv,
    agent: &mut QAgent,
    goal: UserGoal,
    sim_rng: &mut R,
    agent_rng: &mut A,
    learn: bool,
) -> Result<EpisodeResult, DialogueError> {
    env.check_agent(agent)?;
    if !learn {
        return env.rollout(goal, &mut GreedyPolicy(agent), sim_rng);
    }
    let mut ep = Episode::start(env, goal, sim_rng)?;
    while !ep.is_finished() {
        let a = agent.select_action(ep.encoded(), agent_rng)?;
        let t = ep.step(a, sim_rng)?;
        agent.remember(t)?;
        if agent.buffer().len() >= agent.hyper().batch_size {
            agent.train_batch(agent_rng)?;
        }
    }
    agent.finish_episode();
    Ok(ep.finish())
}

fn warm_up(env: &DialogueEnv, agent: &mut QAgent, transitions: usize, seed: u64) -> Result<(), DialogueError> {
    let mut policy = RulePolicy::new(&env.ontology);
    let mut pushed = 0;
    let mut i = 0u64;
    while pushed < transitions {
        let mut rng = stream_rng(mix_seed(seed, STREAM_WARMUP), i);
        i += 1;
        let goal = env.sample_goal(&mut rng)?;
        let mut ep = Episode::start(env, goal, &mut rng)?;
        while !ep.is_finished() && pushed < transitions {
            let a = policy.choose(ep.state(), ep.encoded())?;
            agent.remember(ep.step(a, &mut rng)?)?;
            pushed += 1;
        }
    }
    Ok(())
}

/// Full training protocol: warm-up, epsilon-greedy training with per-window
/// measurement and interim greedy evaluation, then a final evaluation.
///
/// `on_window` sees each window as it closes; returning `false` stops
/// training early (the final evaluation is then skipped and the last interim
/// evaluation is reported instead).
pub fn train_dm<F>(
    env: &DialogueEnv,
    variant: Variant,
    hyper: AgentHyperParams,
    config: &TrainConfig,
    mut on_window: F,
) -> Result<(QAgent, TrainingReport), DialogueError>
where
    F: FnMut(&WindowStats) -> bool,
{
    if config.measure_every == 0 || config.episodes < config.measure_every {
        return Err(DialogueError::Config(format!(
            "need 1 ≤ measure_every ≤ episodes (got {} and {})",
            config.measure_every, config.episodes
        )));
    }
    env.reward.validate()?;
    let mut agent = QAgent::new(
        variant,
        env.state_dim(),
        env.n_actions(),
        hyper.clone(),
        &mut stream_rng(config.seed, STREAM_INIT),
    )?;
    let mut agent_rng = stream_rng(config.seed, STREAM_AGENT);
    warm_up(env, &mut agent, config.warmup_transitions, config.seed)?;

    let eval_seed = config.eval_seed();
    let mut windows = Vec::new();
    let mut window: Vec<EpisodeResult> = Vec::with_capacity(config.measure_every);
    let mut stopped_early = false;
    for ep in 0..config.episodes {
        agent.set_epsilon(hyper.epsilon_at(ep, config.episodes));
        let mut sim_rng = stream_rng(mix_seed(config.seed, STREAM_TRAIN), ep as u64);
        let goal = env.sample_goal(&mut sim_rng)?;
        let mut result = run_episode(env, &mut agent, goal, &mut sim_rng, &mut agent_rng, true)?;
        result.transcript.clear();
        window.push(result);

        let done = ep + 1 == config.episodes;
        if window.len() == config.measure_every || (done && !window.is_empty()) {
            let stats = summarize(&window);
            let eval = if config.interim_eval_episodes > 0 {
                Some(evaluate_policy(env, &agent, config.interim_eval_episodes, eval_seed)?)
            } else {
                None
            };
            let w = WindowStats {
                end_episode: ep + 1,
                episodes: window.len(),
                success_rate: stats.success_rate,
                avg_reward: stats.avg_reward,
                avg_turns: stats.avg_turns,
                epsilon: agent.epsilon(),
                eval,
            };
            log::debug!(
                "{variant} seed {} window ending {}: success {:.3} reward {:.2} turns {:.2}",
                config.seed,
                w.end_episode,
                w.success_rate,
                w.avg_reward,
                w.avg_turns
            );
            window.clear();
            let keep_going = on_window(&w);
            windows.push(w);
            if !keep_going && !done {
                stopped_early = true;
                break;
            }
        }
    }

    let final_eval = if stopped_early {
        windows.last().and_then(|w| w.eval).unwrap_or_default()
    } else {
        evaluate_policy(env, &agent, config.eval_episodes.max(1), eval_seed)?
    };
    agent.set_epsilon(0.0);
    let report = TrainingReport {
        variant,
        hyper,
        seed: config.seed,
        episodes: config.episodes,
        measure_every: config.measure_every,
        state_dim: env.state_dim(),
        n_actions: env.n_actions(),
        reward: env.reward,
        warmup_transitions: config.warmup_transitions,
        eval_seed,
        windows,
        final_eval,
        stopped_early,
    };
    Ok((agent, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue::RandomPolicy;

    fn small_config(seed: u64) -> TrainConfig {
        TrainConfig {
            episodes: 60,
            measure_every: 20,
            seed,
            warmup_transitions: 200,
            interim_eval_episodes: 5,
            eval_episodes: 10,
            eval_seed: None,
        }
    }

    #[test]
    fn window_count_and_determinism() {
        let env = DialogueEnv::bundled();
        let hyper = AgentHyperParams {
            batch_size: 16,
            ..AgentHyperParams::reported_ddqn()
        };
        let (a1, r1) = train_dm(&env, Variant::Ddqn, hyper.clone(), &small_config(4), |_| true).unwrap();
        let (a2, r2) = train_dm(&env, Variant::Ddqn, hyper, &small_config(4), |_| true).unwrap();
        assert_eq!(r1.windows.len(), 3);
        assert_eq!(r1, r2);
        assert_eq!(a1.online().params(), a2.online().params());
        assert_eq!(r1.to_csv().lines().count(), 4);
    }

    #[test]
    fn callback_can_stop_training() {
        let env = DialogueEnv::bundled();
        let hyper = AgentHyperParams {
            batch_size: 16,
            ..Default::default()
        };
        let mut seen = 0;
        let (_, report) = train_dm(&env, Variant::Dqn, hyper, &small_config(1), |_| {
            seen += 1;
            false
        })
        .unwrap();
        assert_eq!(seen, 1);
        assert!(report.stopped_early);
        assert_eq!(report.windows.len(), 1);
    }

    #[test]
    fn measure_every_larger_than_episodes_is_rejected() {
        let env = DialogueEnv::bundled();
        let cfg = TrainConfig {
            episodes: 10,
            measure_every: 20,
            ..Default::default()
        };
        assert!(train_dm(&env, Variant::Dqn, AgentHyperParams::default(), &cfg, |_| true).is_err());
    }

    #[test]
    fn evaluation_leaves_agent_untouched() {
        let env = DialogueEnv::bundled();
        let mut agent = QAgent::new(
            Variant::Dqn,
            env.state_dim(),
            env.n_actions(),
            AgentHyperParams::default(),
            &mut stream_rng(0, 0),
        )
        .unwrap();
        let before = agent.online().params();
        evaluate_policy(&env, &agent, 20, 3).unwrap();
        let mut rng = stream_rng(9, 9);
        let goal = env.sample_goal(&mut rng).unwrap();
        run_episode(&env, &mut agent, goal, &mut rng, &mut stream_rng(1, 1), false).unwrap();
        assert_eq!(before, agent.online().params());
        assert_eq!(agent.buffer().len(), 0);
    }

    #[test]
    fn random_agent_is_a_failure_baseline() {
        let env = DialogueEnv::bundled();
        let mut policy = RandomPolicy {
            n_actions: env.n_actions(),
            rng: stream_rng(0, 77),
        };
        let stats = evaluate_with(&env, &mut policy, 500, 0).unwrap();
        // single-constraint goals can be closed by a lucky match_found, and
        // done (one action in eleven) ends most random conversations early
        assert!(stats.success_rate < 0.3, "{stats:?}");
        assert!(stats.avg_turns < 12.0, "{stats:?}");
        assert!(stats.avg_reward < -10.0, "{stats:?}");
    }

    #[test]
    fn summaries_match_a_recount() {
        let env = DialogueEnv::bundled();
        let mut policy = RulePolicy::new(&env.ontology);
        let episodes = evaluate_episodes(&env, &mut policy, 50, 2).unwrap();
        let stats = summarize(&episodes);
        let successes = episodes.iter().filter(|e| e.success).count();
        assert_eq!(stats.success_rate, successes as f64 / 50.0);
        for e in &episodes {
            assert_eq!(e.cumulative_reward, env.reward.episode_return(e.turns, e.success));
        }
        assert_eq!(stats.success_rate, 1.0);
    }
}
