//! Simulation throughput measurement.

use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use c2sim_core::commanders::by_name;
use c2sim_core::env::{Env, EnvConfig, EnvError};
use c2sim_core::rng::SimRng;
use c2sim_core::scenario::Scenario;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub scenario: String,
    pub policy: String,
    pub workers: usize,
    pub ticks_per_worker: u64,
    pub episodes: u64,
    pub elapsed_secs: f64,
    /// Mean over workers of each worker's own rate.
    pub ticks_per_sec_per_worker: f64,
    /// All ticks over wall-clock time.
    pub aggregate_ticks_per_sec: f64,
    /// Simulated time over wall-clock time, aggregate.
    pub realtime_factor: f64,
}

/// Run `ticks` environment steps on each of `workers` threads, each with
/// its own environment, `policy` commanding Blue against the scenario's Red
/// controller. Episodes restart on new seeds as they end.
pub fn run_bench(
    scenario: &Arc<Scenario>,
    policy: &str,
    ticks: u64,
    workers: usize,
    seed: u64,
) -> Result<BenchReport, String> {
    if by_name(policy).is_none() {
        return Err(format!("unknown policy {policy:?}"));
    }
    if workers == 0 {
        return Err("workers must be at least 1".into());
    }
    let start = Instant::now();
    let results: Vec<Result<(u64, Duration), EnvError>> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let scenario = scenario.clone();
                s.spawn(move || worker(scenario, policy, ticks, seed.wrapping_add((w as u64) << 32)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("bench worker panicked")).collect()
    });
    let elapsed = start.elapsed().as_secs_f64();
    let mut episodes = 0;
    let mut rates = Vec::new();
    for r in results {
        let (e, d) = r.map_err(|e| e.to_string())?;
        episodes += e;
        rates.push(ticks as f64 / d.as_secs_f64().max(1e-9));
    }
    let aggregate = (ticks * workers as u64) as f64 / elapsed.max(1e-9);
    Ok(BenchReport {
        scenario: scenario.name.clone(),
        policy: policy.to_string(),
        workers,
        ticks_per_worker: ticks,
        episodes,
        elapsed_secs: elapsed,
        ticks_per_sec_per_worker: rates.iter().sum::<f64>() / rates.len() as f64,
        aggregate_ticks_per_sec: aggregate,
        realtime_factor: aggregate * scenario.tick_seconds,
    })
}

fn worker(scenario: Arc<Scenario>, policy: &str, ticks: u64, seed: u64) -> Result<(u64, Duration), EnvError> {
    let mut env = Env::new(scenario, EnvConfig::default())?;
    let mut commander = by_name(policy).expect("checked");
    let mut rng = SimRng::derived(seed, 0x6265_6e63);
    let start = Instant::now();
    let mut episode = 0;
    env.reset(seed)?;
    for _ in 0..ticks {
        let actions = commander.act(&env.view_as(env.controlled(), commander.full_vision())?, &mut rng);
        if env.step(&actions)?.done {
            episode += 1;
            commander.reset();
            env.reset(seed.wrapping_add(episode))?;
        }
    }
    Ok((episode, start.elapsed()))
}
