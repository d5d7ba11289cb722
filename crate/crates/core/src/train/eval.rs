use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{OpponentSpec, TrainError};
use crate::commanders::Commander;
use crate::env::{Env, EnvConfig, StepResult, Termination};
use crate::rng::SimRng;
use crate::scenario::Scenario;
use crate::sim::Force;

const POLICY_SALT: u64 = 0x706f_6c69;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub seed: u64,
    pub total_reward: f64,
    pub blue_casualties: u32,
    pub red_casualties: u32,
    pub length: u64,
    pub termination: Termination,
    /// Mean distance of the controlled force's units to their goal at the
    /// end of the episode.
    pub goal_distance_km: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rollouts: Vec<Rollout>,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

impl EvalReport {
    pub fn column(&self, f: impl Fn(&Rollout) -> f64) -> Vec<f64> {
        self.rollouts.iter().map(f).collect()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.column(|r| r.total_reward)
    }

    pub fn mean_reward(&self) -> f64 {
        mean(&self.rewards())
    }

    pub fn mean_blue_casualties(&self) -> f64 {
        mean(&self.column(|r| r.blue_casualties as f64))
    }

    pub fn mean_red_casualties(&self) -> f64 {
        mean(&self.column(|r| r.red_casualties as f64))
    }
}

/// Play one episode from `seed` with `policy` commanding the environment's
/// controlled force.
pub fn run_episode(env: &mut Env, policy: &mut dyn Commander, seed: u64) -> Result<Rollout, TrainError> {
    run_episode_observed(env, policy, seed, |_, _| {})
}

/// [`run_episode`], calling `observe` after every step.
pub fn run_episode_observed(
    env: &mut Env,
    policy: &mut dyn Commander,
    seed: u64,
    mut observe: impl FnMut(&Env, &StepResult),
) -> Result<Rollout, TrainError> {
    env.reset(seed)?;
    policy.reset();
    let mut rng = SimRng::derived(seed, POLICY_SALT);
    let me = env.controlled();
    while !env.is_done() {
        let actions = policy.act(&env.view_as(me, policy.full_vision())?, &mut rng);
        let result = env.step(&actions)?;
        observe(env, &result);
    }
    Ok(summarize(env, seed).expect("episode finished"))
}

/// Outcome row of a finished episode; `None` while it is still running.
pub fn summarize(env: &Env, seed: u64) -> Option<Rollout> {
    let world = env.world()?;
    let termination = env.termination()?;
    let me = env.controlled();
    let goal = env.scenario().goals.of(me);
    let own: Vec<f64> =
        world.units.iter().filter(|u| u.force == me).map(|u| u.position.dist(goal) * world.cell_km()).collect();
    let [blue, red] = [Force::Blue, Force::Red].map(|f| env.casualties()[f.index()]);
    Some(Rollout {
        seed,
        total_reward: env.score(),
        blue_casualties: blue,
        red_casualties: red,
        length: world.tick,
        termination,
        goal_distance_km: if own.is_empty() { 0.0 } else { own.iter().sum::<f64>() / own.len() as f64 },
    })
}

/// `n` rollouts on episode seeds `seed, seed + 1, …`, so equal seeds pair
/// rollouts across policies.
pub fn evaluate(
    scenario: &Arc<Scenario>,
    controlled: Force,
    policy: &mut dyn Commander,
    n: usize,
    opponent: &OpponentSpec,
    seed: u64,
) -> Result<EvalReport, TrainError> {
    let config = EnvConfig { controlled, ..EnvConfig::default() };
    let mut env = opponent.attach(Env::new(scenario.clone(), config)?, controlled)?;
    let rollouts =
        (0..n as u64).map(|i| run_episode(&mut env, policy, seed.wrapping_add(i))).collect::<Result<_, _>>()?;
    Ok(EvalReport { rollouts })
}
