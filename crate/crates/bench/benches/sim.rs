use std::sync::Arc;

use c2sim_cli::replay::Recorder;
use c2sim_core::commanders::by_name;
use c2sim_core::env::{Env, EnvConfig};
use c2sim_core::rng::SimRng;
use c2sim_core::scenario::{build_world, builtin_skirmish, builtin_tigerclaw};
use c2sim_core::sim::advance_tick;
use c2sim_core::train::run_episode_observed;
use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};

fn raw_ticks(c: &mut Criterion) {
    let s = builtin_tigerclaw();
    let mut g = c.benchmark_group("advance_tick");
    g.throughput(Throughput::Elements(100));
    g.bench_function("tigerclaw_100_idle", |b| {
        b.iter_batched(
            || build_world(&s, 7).unwrap(),
            |mut w| {
                for _ in 0..100 {
                    advance_tick(&mut w, &[]).unwrap();
                }
                w
            },
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

fn env_steps(c: &mut Criterion) {
    let mut g = c.benchmark_group("env_step");
    g.throughput(Throughput::Elements(1000));
    for policy in ["random", "doctrine", "bot:1"] {
        let scenario = Arc::new(builtin_tigerclaw());
        let mut env = Env::new(scenario, EnvConfig::default()).unwrap();
        let mut commander = by_name(policy).unwrap();
        let mut rng = SimRng::new(3);
        let mut seed = 0;
        env.reset(seed).unwrap();
        g.bench_function(policy, |b| {
            b.iter(|| {
                for _ in 0..1000 {
                    if env.is_done() {
                        seed += 1;
                        env.reset(seed).unwrap();
                    }
                    let actions = commander.act(&env.view().unwrap(), &mut rng);
                    env.step(&actions).unwrap();
                }
            })
        });
    }
    g.finish();
}

fn recorded_episode(c: &mut Criterion) {
    let scenario = Arc::new(builtin_skirmish());
    c.bench_function("skirmish_episode_record_verify", |b| {
        b.iter(|| {
            let mut env = Env::new(scenario.clone(), EnvConfig::default()).unwrap();
            let mut policy = by_name("doctrine").unwrap();
            env.reset(11).unwrap();
            let mut rec = Recorder::for_env(&env, 11, ["doctrine".into(), env.opponent_name()]);
            run_episode_observed(&mut env, policy.as_mut(), 11, |env, r| {
                rec.record(r.reward, &r.info, env.world().unwrap())
            })
            .unwrap();
            rec.finish(&env).verify(None).unwrap()
        })
    });
}

criterion_group!(benches, raw_ticks, env_steps, recorded_episode);
criterion_main!(benches);
