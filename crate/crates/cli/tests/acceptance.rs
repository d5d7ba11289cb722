//! Acceptance checks, one PASS/FAIL line per criterion on stderr.
//!
//! Everything runs inside one test so the timed criteria do not compete
//! with other tests for the CPU. Set `ACCEPTANCE_ONLY=1,4,10` to run a
//! subset.

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use c2sim_cli::bench::run_bench;
use c2sim_cli::replay::{EndRecord, Recorder, Replay, Verdict, HASH_INTERVAL};
use c2sim_cli::stats::{paired_t_test, paired_win_rate, separation};
use c2sim_core::commanders::{by_name, Commander};
use c2sim_core::env::{
    encode_spatial_obs, encode_vector_obs, reward, DiscreteAction, Env, EnvConfig, ForceView, ObsMode, Observation,
    RouteCache, SpatialConfig, Termination, FEATURE_NAMES,
};
use c2sim_core::nn::{
    dot, entropy, Alloc, Conv2d, Dense, Lstm, LstmState, NetConfig, NetInput, NetMode, PolicyNet, StepGrad, Tape,
};
use c2sim_core::rng::SimRng;
use c2sim_core::scenario::{build_world, builtin_skirmish, builtin_tigerclaw, Randomization, Scenario};
use c2sim_core::sim::{
    advance_tick, force_picture, visible_enemies, Cell, CellPos, CombatEvent, EventKind, Force, Order, OrderKind, Pos,
    UnitId, WorldState,
};
use c2sim_core::train::{
    a2c_gradients, evaluate, mean, n_step_returns, run_episode_observed, train, LearnedCommander, LossConfig,
    OpponentSpec, StepRecord, TrainConfig, Trajectory,
};

struct Outcome {
    pass: bool,
    /// Failure expected on this host; reported but not asserted.
    unattainable: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, unattainable: false, detail }
    }
}

fn line(n: u32, name: &str, o: &Outcome, elapsed: Duration) {
    let verdict = match (o.pass, o.unattainable) {
        (true, _) => "PASS",
        (false, false) => "FAIL",
        (false, true) => "FAIL (unattainable on this host)",
    };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "criterion {n:>2} {verdict}: {name}: {} [{:.1}s]", o.detail, elapsed.as_secs_f64());
}

fn selected(n: u32) -> bool {
    match std::env::var("ACCEPTANCE_ONLY") {
        Ok(list) => list.split(',').any(|s| s.trim().parse() == Ok(n)),
        Err(_) => true,
    }
}

type Criterion = fn() -> Outcome;

#[test]
fn acceptance_criteria() {
    let criteria: [(u32, &str, Criterion); 10] = [
        (1, "determinism", determinism),
        (2, "terrain exploit guard", terrain_guard),
        (3, "fog-of-war soundness", fog_soundness),
        (4, "reward fidelity", reward_fidelity),
        (5, "spaces fidelity", spaces_fidelity),
        (6, "numerics", numerics),
        (7, "learning sanity", learning_sanity),
        (8, "baseline ordering", baseline_ordering),
        (9, "throughput", throughput),
        (10, "replay", replay_integrity),
    ];
    let mut failed = Vec::new();
    for (n, name, run) in criteria {
        if !selected(n) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        line(n, name, &o, start.elapsed());
        if !o.pass && !o.unattainable {
            failed.push(n);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

fn tigerclaw() -> Arc<Scenario> {
    Arc::new(builtin_tigerclaw())
}

fn skirmish() -> Arc<Scenario> {
    Arc::new(builtin_skirmish())
}

/// Blue under `policy` against `opponent` (the scenario's Red when `None`).
fn env_for(scenario: &Arc<Scenario>, opponent: Option<&str>) -> Env {
    let env = Env::new(scenario.clone(), EnvConfig::default()).unwrap();
    match opponent {
        Some(name) => env.with_opponent(Some(by_name(name).unwrap())),
        None => env,
    }
}

// ---------------------------------------------------------------- 1

fn determinism() -> Outcome {
    let start = Instant::now();
    let mut pool = vec![tigerclaw(), skirmish()];
    let mut noisy = builtin_tigerclaw();
    noisy.randomization =
        Some(Randomization { spawn_jitter: 2.0, attribute_noise: 0.2, stochastic_fire: true, accuracy: 0.6 });
    pool.push(Arc::new(noisy));
    let policies = ["random", "doctrine", "bot:1", "bot:7"];
    let mut rng = SimRng::new(0xde7e);
    let mut mismatches = Vec::new();
    let mut ticks = 0;
    for i in 0..100 {
        let scenario = &pool[rng.below(pool.len() as u64) as usize];
        let seed = rng.next_u64();
        let policy = policies[rng.below(policies.len() as u64) as usize];
        let play = || {
            let mut env = env_for(scenario, None);
            let mut commander = by_name(policy).unwrap();
            let mut ledger: Vec<CombatEvent> = Vec::new();
            let mut hashes = Vec::new();
            let rollout = run_episode_observed(&mut env, commander.as_mut(), seed, |env, r| {
                ledger.extend_from_slice(&r.info.events);
                hashes.push(env.world().unwrap().state_hash());
            })
            .unwrap();
            (ledger, hashes, env.world().unwrap().state_hash(), rollout.total_reward.to_bits())
        };
        let a = play();
        let b = play();
        ticks += a.1.len();
        if a != b {
            mismatches.push(i);
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatches.is_empty() && elapsed < Duration::from_secs(120);
    Outcome::new(
        pass,
        format!(
            "100 pairs ({ticks} ticks each run), {} mismatched, {:.1}s (limit 120s)",
            mismatches.len(),
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- 2, 3

/// Arbitrary orders for every living unit of both forces, with most moves
/// aimed at the wadi and long enough to jump across it.
fn fuzz_orders(world: &WorldState, rng: &mut SimRng) -> Vec<Order> {
    let wadi_x = world.terrain.width() as f64 / 2.0;
    let n = world.units.len() as u64;
    let (w, h) = (world.terrain.width() as u64, world.terrain.height() as u64);
    let mut orders = Vec::new();
    for u in world.units.iter().filter(|u| u.alive()) {
        for _ in 0..1 + rng.below(2) {
            let kind = match rng.below(8) {
                0 => OrderKind::SetSpeed { kmh: rng.uniform(0.0, 2.0 * u.speed_max) },
                1 => OrderKind::SetHeading { radians: rng.uniform(-7.0, 7.0) },
                2 => OrderKind::Move { dx: rng.uniform(-8.0, 8.0), dy: rng.uniform(-8.0, 8.0) },
                3 | 4 => {
                    let toward = (wadi_x - u.position.x).signum();
                    OrderKind::Move { dx: toward * rng.uniform(0.0, 8.0), dy: rng.uniform(-3.0, 3.0) }
                }
                5 => OrderKind::Fire { target: UnitId(rng.below(n) as u32) },
                6 => OrderKind::CallForFire { cell: CellPos::new(rng.below(w) as i32, rng.below(h) as i32) },
                _ => OrderKind::HoldFire,
            };
            orders.push(Order::new(u.id, kind));
        }
    }
    orders
}

fn on_impassable(world: &WorldState) -> usize {
    world.units.iter().filter(|u| world.terrain.cell_at(u.position).is_none_or(|c| c == Cell::Impassable)).count()
}

/// Moves every unit to a random passable cell within a few cells of the
/// map's vertical midline, where the wadi runs on the desk map.
fn crowd_the_band(world: &mut WorldState, rng: &mut SimRng) {
    let mid = world.terrain.width() as f64 / 2.0;
    let h = world.terrain.height() as f64;
    for i in 0..world.units.len() {
        loop {
            let p = Pos::new(rng.uniform(mid - 6.0, mid + 6.0), rng.uniform(0.0, h));
            if world.terrain.traversable(p) {
                world.units[i].position = p;
                world.units[i].bank = None;
                break;
            }
        }
    }
}

fn fuzz_episode(scenario: &Scenario, seed: u64, mut per_tick: impl FnMut(&WorldState, &[CombatEvent])) -> (u64, usize) {
    let mut world = build_world(scenario, seed).unwrap();
    let mut rng = SimRng::derived(seed, 0xf022);
    if seed % 2 == 1 {
        crowd_the_band(&mut world, &mut rng);
    }
    let mut violations = on_impassable(&world);
    per_tick(&world, &[]);
    while world.tick < scenario.max_ticks && Force::BOTH.iter().all(|&f| world.living_units(f).next().is_some()) {
        let orders = fuzz_orders(&world, &mut rng);
        let events = advance_tick(&mut world, &orders).unwrap();
        violations += on_impassable(&world);
        per_tick(&world, &events);
    }
    (world.tick, violations)
}

fn terrain_guard() -> Outcome {
    let s = builtin_tigerclaw();
    let (mut ticks, mut violations, mut crossings, mut blocked) = (0, 0, 0usize, 0usize);
    for seed in 0..10_000u64 {
        let (t, v) = fuzz_episode(&s, seed, |_, events| {
            crossings += events.iter().filter(|e| e.kind == EventKind::Crossed).count();
            blocked += events.iter().filter(|e| e.kind == EventKind::MoveBlocked).count();
        });
        ticks += t;
        violations += v;
    }
    Outcome::new(
        violations == 0,
        format!(
            "10000 fuzzed episodes, {ticks} ticks, {blocked} blocked moves, {crossings} crossings, {violations} unit-ticks on impassable cells"
        ),
    )
}

fn brute_force_visible(world: &WorldState, observer: UnitId) -> BTreeSet<UnitId> {
    let o = &world.units[observer.index()];
    if o.strength == 0 {
        return BTreeSet::new();
    }
    world
        .units
        .iter()
        .filter(|e| e.force != o.force && e.strength > 0)
        .filter(|e| {
            ((e.position.x - o.position.x).powi(2) + (e.position.y - o.position.y).powi(2)).sqrt() * world.cell_km()
                <= o.sensor_range
        })
        .map(|e| e.id)
        .collect()
}

fn fog_soundness() -> Outcome {
    const SENSING_EPISODES: u64 = 2_000;
    const OBS_EPISODES: u64 = 100;
    let mut sensing_ticks = 0;
    let mut obs_ticks = 0;
    let mut failures = Vec::new();
    let mut perturb_rng = SimRng::new(0xf06);
    for (s, which) in [(builtin_tigerclaw(), "tigerclaw"), (builtin_skirmish(), "skirmish")] {
        let objectives: Vec<_> = s.objective_regions().cloned().collect();
        let spatial = SpatialConfig::default();
        let routes = RouteCache::new(Arc::new(build_world(&s, 0).unwrap().terrain.as_ref().clone()));
        for seed in 0..SENSING_EPISODES {
            fuzz_episode(&s, seed, |world, _| {
                sensing_ticks += 1;
                for force in Force::BOTH {
                    let mut union = BTreeSet::new();
                    for u in world.units.iter().filter(|u| u.force == force) {
                        let got: BTreeSet<UnitId> = visible_enemies(world, u.id).into_iter().collect();
                        let want = brute_force_visible(world, u.id);
                        if got != want && failures.len() < 5 {
                            failures.push(format!(
                                "{which} seed {seed} tick {}: {:?} sees {got:?}, brute force {want:?}",
                                world.tick, u.id
                            ));
                        }
                        union.extend(want);
                    }
                    let picture: BTreeSet<UnitId> = force_picture(world, force).into_iter().collect();
                    if picture != union && failures.len() < 5 {
                        failures.push(format!("{which} seed {seed} tick {}: {force:?} picture differs", world.tick));
                    }
                }
                if seed >= OBS_EPISODES {
                    return;
                }
                obs_ticks += 1;
                for force in Force::BOTH {
                    let goal = s.goals.of(force);
                    let seen: BTreeSet<UnitId> = force_picture(world, force).into_iter().collect();
                    let observe = |w: &WorldState| {
                        let view = ForceView::new(w, force, goal, false, &routes);
                        let vectors: Vec<_> =
                            view.friendly().map(|u| encode_vector_obs(&view, u.id, goal).unwrap()).collect();
                        (vectors, encode_spatial_obs(&view, &spatial, &objectives))
                    };
                    let mut perturbed = world.clone();
                    for e in perturbed.units.iter_mut().filter(|e| e.force != force && !seen.contains(&e.id)) {
                        if e.alive() {
                            e.strength = 1 + perturb_rng.below(e.strength_max as u64) as u32;
                            e.speed = perturb_rng.uniform(0.0, e.speed_max);
                            e.weapon_range *= perturb_rng.uniform(0.5, 2.0);
                        }
                        e.ammo = perturb_rng.below(e.ammo_max as u64 + 1) as u32;
                        e.heading = perturb_rng.uniform(-3.0, 3.0);
                        e.fuel_consumed = perturb_rng.uniform(0.0, e.fuel_capacity);
                    }
                    if observe(world) != observe(&perturbed) && failures.len() < 5 {
                        failures
                            .push(format!("{which} seed {seed} tick {}: {force:?} observation changed", world.tick));
                    }
                }
            });
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "sensing checked on {sensing_ticks} fuzz ticks, observation invariance on {obs_ticks}; {}",
            if failures.is_empty() { "no differences".to_string() } else { failures.join("; ") }
        ),
    )
}

// ---------------------------------------------------------------- 4

fn exact(problems: &mut Vec<String>, what: &str, got: f64, want: f64) {
    if got != want || got.is_nan() {
        problems.push(format!("{what}: {got} != {want}"));
    }
}

fn reward_fidelity() -> Outcome {
    let mut problems = Vec::new();

    let tc = builtin_tigerclaw();
    let world = build_world(&tc, 1).unwrap();
    let blue = world.units.iter().find(|u| u.force == Force::Blue).unwrap().id;
    let red = world.units.iter().find(|u| u.force == Force::Red).unwrap().id;
    let goal = tc.goals.blue;
    let ev = |kind, actor| vec![CombatEvent::new(kind, actor, 1)];
    let scheme = &tc.reward_scheme;
    exact(&mut problems, "crossed", reward(scheme, &ev(EventKind::Crossed, blue), &world, Force::Blue, goal), 10.0);
    exact(
        &mut problems,
        "retreated",
        reward(scheme, &ev(EventKind::Retreated, blue), &world, Force::Blue, goal),
        -10.0,
    );
    exact(
        &mut problems,
        "enemy destroyed",
        reward(scheme, &ev(EventKind::Destroyed, red), &world, Force::Blue, goal),
        10.0,
    );
    exact(
        &mut problems,
        "friendly destroyed",
        reward(scheme, &ev(EventKind::Destroyed, blue), &world, Force::Blue, goal),
        -10.0,
    );
    exact(&mut problems, "no events", reward(scheme, &[], &world, Force::Blue, goal), 0.0);
    exact(&mut problems, "red crossing", reward(scheme, &ev(EventKind::Crossed, red), &world, Force::Blue, goal), 0.0);

    let sk = builtin_skirmish();
    let mut world = build_world(&sk, 2).unwrap();
    let goal = sk.goals.blue;
    let blue: Vec<UnitId> = world.units.iter().filter(|u| u.force == Force::Blue).map(|u| u.id).collect();
    let red = world.units.iter().find(|u| u.force == Force::Red).unwrap().id;
    world.units[blue[3].index()].strength = 0;
    let km: f64 = blue[..3]
        .iter()
        .map(|&id| {
            let p = world.units[id.index()].position;
            (goal.x - p.x).hypot(goal.y - p.y) * world.cell_km()
        })
        .sum();
    let scheme = &sk.reward_scheme;
    let r = |events: &[CombatEvent]| reward(scheme, events, &world, Force::Blue, goal);
    exact(&mut problems, "distance term", r(&[]), 0.0 - 0.01 * km);
    exact(&mut problems, "friendly damaged", r(&ev(EventKind::Damaged, blue[0])), -0.5 - 0.01 * km);
    exact(&mut problems, "friendly destroyed", r(&ev(EventKind::Destroyed, blue[0])), -1.0 - 0.01 * km);
    exact(&mut problems, "enemy damaged", r(&ev(EventKind::Damaged, red)), 0.5 - 0.01 * km);
    exact(&mut problems, "enemy destroyed", r(&ev(EventKind::Destroyed, red)), 1.0 - 0.01 * km);
    exact(&mut problems, "enemy shot fired", r(&ev(EventKind::Fired, red)), 0.0 - 0.01 * km);
    let mut moved = world.clone();
    moved.units[blue[0].index()].position = Pos::new(goal.x - 4.0, goal.y);
    let p0 = world.units[blue[0].index()].position;
    let delta_km = (goal.x - p0.x).hypot(goal.y - p0.y) * world.cell_km() - 4.0 * world.cell_km();
    let diff = reward(scheme, &[], &moved, Force::Blue, goal) - r(&[]);
    if (diff - 0.01 * delta_km).abs() > 1e-12 {
        problems.push(format!("moving {delta_km} km closer changed the reward by {diff}"));
    }

    let mut ledgers = 0;
    for (i, scenario) in [tigerclaw(), skirmish()].iter().enumerate() {
        for seed in 0..20 {
            let mut env = env_for(scenario, None);
            let mut policy = by_name(["random", "doctrine"][seed as usize % 2]).unwrap();
            env.reset(seed).unwrap();
            let mut rec = Recorder::for_env(&env, seed, ["p".into(), "o".into()]);
            let mut summed = 0.0;
            run_episode_observed(&mut env, policy.as_mut(), seed, |env, r| {
                summed += r.reward;
                rec.record(r.reward, &r.info, env.world().unwrap());
            })
            .unwrap();
            let score = env.score();
            let v = rec.finish(&env).verify(None).unwrap();
            exact(&mut problems, &format!("scenario {i} seed {seed} step sum"), summed, score);
            exact(&mut problems, &format!("scenario {i} seed {seed} replayed ledger"), v.ledger_score, score);
            ledgers += 1;
        }
    }
    Outcome::new(
        problems.is_empty(),
        format!(
            "tigerclaw +10/-10/+10/-10, attrition -0.5/-1/+0.5/+1 and -0.01/km, {ledgers} episode scores vs replayed ledgers; {}",
            if problems.is_empty() { "all exact".to_string() } else { problems.join("; ") }
        ),
    )
}

// ---------------------------------------------------------------- 5

fn spaces_fidelity() -> Outcome {
    const FEATURES: [&str; 17] = [
        "damage_state",
        "x_location",
        "y_location",
        "equipment_loss",
        "weapon_range",
        "sensor_range",
        "fuel_consumed",
        "ammunition_consumed",
        "ammunition_total",
        "equipment_category",
        "maximum_speed",
        "perceived_opposition_entities",
        "goal_distance",
        "goal_direction",
        "fire_support",
        "taking_fire",
        "engaging_targets",
    ];
    const ACTIONS: [&str; 12] = [
        "no_op",
        "move_forward",
        "move_backward",
        "move_right",
        "move_left",
        "speed_up",
        "slow_down",
        "orient_to_goal",
        "halt",
        "fire_weapon",
        "call_for_fire",
        "react_to_contact",
    ];
    let mut problems = Vec::new();
    if FEATURE_NAMES != FEATURES {
        problems.push(format!("features {FEATURE_NAMES:?}"));
    }
    let actions: Vec<&str> = DiscreteAction::ALL.iter().map(|a| a.name()).collect();
    if actions != ACTIONS {
        problems.push(format!("actions {actions:?}"));
    }
    let cfg = SpatialConfig::default();
    if (cfg.minimap_layers, cfg.screen_layers, cfg.nonspatial) != (7, 13, 13) {
        problems.push(format!("spatial layers {}/{}/{}", cfg.minimap_layers, cfg.screen_layers, cfg.nonspatial));
    }

    let mut env = Env::new(tigerclaw(), EnvConfig::default()).unwrap();
    match env.reset(3).unwrap() {
        Observation::Vector { units } => {
            if units.is_empty()
                || units.iter().any(|(_, f)| f.len() != 17 || f.iter().any(|v| !(0.0..=1.0).contains(v)))
            {
                problems.push("vector observation rows".into());
            }
        }
        _ => problems.push("default observation is not the vector mode".into()),
    }
    let mut env =
        Env::new(tigerclaw(), EnvConfig { obs_mode: ObsMode::Spatial(cfg.clone()), ..EnvConfig::default() }).unwrap();
    match env.reset(3).unwrap() {
        Observation::Spatial(o) => {
            let plane = o.n * o.n;
            if o.minimap.len() != 7 * plane || o.screen.len() != 13 * plane || o.nonspatial.len() != 13 {
                problems.push(format!("spatial shapes {}/{}/{}", o.minimap.len(), o.screen.len(), o.nonspatial.len()));
            }
        }
        _ => problems.push("spatial mode returned a vector observation".into()),
    }
    let net = PolicyNet::new(NetConfig::vector(), 0);
    if net.head_sizes() != vec![12] {
        problems.push(format!("vector policy heads {:?}", net.head_sizes()));
    }
    Outcome::new(
        problems.is_empty(),
        if problems.is_empty() {
            "17 features, 12 actions, 7/13/13 spatial layers, all in order".into()
        } else {
            problems.join("; ")
        },
    )
}

// ---------------------------------------------------------------- 6

/// Below this magnitude central differences are dominated by rounding, so
/// components there are held to an absolute limit instead.
const GRAD_FLOOR: f64 = 1e-6;
const GRAD_ABS_LIMIT: f64 = 1e-9;

#[derive(Debug, Default)]
struct GradCheck {
    max_rel_error: f64,
    max_abs_error_small: f64,
    small: usize,
}

impl GradCheck {
    fn ok(&self) -> bool {
        self.max_rel_error < 1e-4 && self.max_abs_error_small < GRAD_ABS_LIMIT
    }
}

fn fd_check(params: &[f64], analytic: &[f64], eps: f64, mut loss: impl FnMut(&[f64]) -> f64) -> GradCheck {
    let mut p = params.to_vec();
    let mut r = GradCheck::default();
    for i in 0..p.len() {
        p[i] = params[i] + eps;
        let up = loss(&p);
        p[i] = params[i] - eps;
        let down = loss(&p);
        p[i] = params[i];
        let numeric = (up - down) / (2.0 * eps);
        let err = (analytic[i] - numeric).abs();
        let scale = analytic[i].abs().max(numeric.abs());
        if scale < GRAD_FLOOR {
            r.small += 1;
            r.max_abs_error_small = r.max_abs_error_small.max(err);
        } else {
            r.max_rel_error = r.max_rel_error.max(err / scale);
        }
    }
    r
}

fn random_vec(rng: &mut SimRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(-scale, scale)).collect()
}

fn grad_dense() -> GradCheck {
    let mut alloc = Alloc::default();
    let d = Dense::new(6, 4, &mut alloc);
    let mut rng = SimRng::new(1);
    let p = random_vec(&mut rng, alloc.total(), 1.0);
    let x = random_vec(&mut rng, 6, 1.0);
    let t = random_vec(&mut rng, 4, 1.0);
    let forward = |p: &[f64]| {
        let mut y = vec![0.0; 4];
        d.forward(p, &x, &mut y);
        y
    };
    let y = forward(&p);
    let dy: Vec<f64> = y.iter().zip(&t).map(|(a, b)| (a - b).tanh() * 2.0 + a).collect();
    let loss = |p: &[f64]| forward(p).iter().zip(&t).map(|(a, b)| 2.0 * (a - b).cosh().ln() + 0.5 * a * a).sum::<f64>();
    let mut g = vec![0.0; p.len()];
    d.backward(&p, &x, &dy, &mut g, None);
    fd_check(&p, &g, 1e-5, loss)
}

fn grad_conv() -> GradCheck {
    let mut alloc = Alloc::default();
    let c1 = Conv2d::new(2, 3, 3, 5, 5, &mut alloc);
    let c2 = Conv2d::new(3, 2, 3, 5, 5, &mut alloc);
    let mut rng = SimRng::new(2);
    let p = random_vec(&mut rng, alloc.total(), 0.5);
    let x = random_vec(&mut rng, c1.input_len(), 1.0);
    let w = random_vec(&mut rng, c2.output_len(), 1.0);
    let fwd = |p: &[f64]| {
        let mut a1 = vec![0.0; c1.output_len()];
        c1.forward(p, &x, &mut a1);
        a1.iter_mut().for_each(|v| *v = v.tanh());
        let mut a2 = vec![0.0; c2.output_len()];
        c2.forward(p, &a1, &mut a2);
        (a1, a2)
    };
    let (a1, _) = fwd(&p);
    let mut g = vec![0.0; p.len()];
    let mut d1 = vec![0.0; a1.len()];
    c2.backward(&p, &a1, &w, &mut g, Some(&mut d1));
    d1.iter_mut().zip(&a1).for_each(|(d, a)| *d *= 1.0 - a * a);
    c1.backward(&p, &x, &d1, &mut g, None);
    fd_check(&p, &g, 1e-5, |p| dot(&fwd(p).1, &w))
}

fn grad_lstm() -> GradCheck {
    let mut alloc = Alloc::default();
    let l = Lstm::new(3, 5, &mut alloc);
    let mut rng = SimRng::new(3);
    let mut p = vec![0.0; alloc.total()];
    l.init(&mut p, &mut rng);
    p.iter_mut().for_each(|v| *v += rng.uniform(-0.3, 0.3));
    let xs: Vec<Vec<f64>> = (0..5).map(|_| random_vec(&mut rng, 3, 1.0)).collect();
    let ws: Vec<Vec<f64>> = (0..5).map(|_| random_vec(&mut rng, 5, 1.0)).collect();
    let wc = random_vec(&mut rng, 5, 1.0);
    let loss = |p: &[f64]| {
        let mut s = LstmState::zeros(5);
        let mut total = 0.0;
        for (x, w) in xs.iter().zip(&ws) {
            s = l.step(p, x, &s).0;
            total += dot(&s.h, w);
        }
        total + dot(&s.c, &wc)
    };
    let mut caches = Vec::new();
    let mut s = LstmState::zeros(5);
    for x in &xs {
        let (next, cache) = l.step(&p, x, &s);
        caches.push(cache);
        s = next;
    }
    let mut g = vec![0.0; p.len()];
    let mut dh = vec![0.0; 5];
    let mut dc = wc.clone();
    for (cache, w) in caches.iter().zip(&ws).rev() {
        let dh_t: Vec<f64> = dh.iter().zip(w).map(|(a, b)| a + b).collect();
        let (_, dhp, dcp) = l.backward_step(&p, cache, &dh_t, &dc, &mut g);
        dh = dhp;
        dc = dcp;
    }
    fd_check(&p, &g, 1e-5, loss)
}

/// `Σ_t Σ_heads c·log p + (v − r)²` through the whole recurrent net.
fn net_loss(
    net: &PolicyNet,
    inputs: &[NetInput],
    coef: &[Vec<Vec<f64>>],
    targets: &[f64],
) -> (f64, Vec<StepGrad>, Tape) {
    let mut tape = Tape::new();
    let mut s = net.initial_state();
    let (mut loss, mut grads) = (0.0, Vec::new());
    for ((x, c), r) in inputs.iter().zip(coef).zip(targets) {
        let out = net.forward_recorded(*x, &s, &mut tape).unwrap();
        let mut sg = StepGrad::zeros(&net.head_sizes());
        for ((p, ck), dz) in out.heads.iter().zip(c).zip(&mut sg.logits) {
            let csum: f64 = ck.iter().sum();
            for j in 0..p.len() {
                loss += ck[j] * p[j].ln();
                dz[j] = ck[j] - p[j] * csum;
            }
        }
        loss += (out.value - r).powi(2);
        sg.value = 2.0 * (out.value - r);
        grads.push(sg);
        s = out.state;
    }
    (loss, grads, tape)
}

fn grad_net(net: &PolicyNet, inputs: &[NetInput], rng: &mut SimRng) -> GradCheck {
    let mut net = net.clone();
    net.params_mut().iter_mut().for_each(|v| *v += rng.uniform(-0.5, 0.5));
    let coef: Vec<Vec<Vec<f64>>> =
        inputs.iter().map(|_| net.head_sizes().iter().map(|&k| random_vec(rng, k, 1.0)).collect()).collect();
    let targets = random_vec(rng, inputs.len(), 1.0);
    let (_, grads, tape) = net_loss(&net, inputs, &coef, &targets);
    let mut g = vec![0.0; net.param_count()];
    net.backward(&tape, &grads, &mut g).unwrap();
    let mut probe = net.clone();
    fd_check(net.params(), &g, 1e-5, |p| {
        probe.params_mut().copy_from_slice(p);
        net_loss(&probe, inputs, &coef, &targets).0
    })
}

fn small_vector_net(seed: u64) -> PolicyNet {
    PolicyNet::new(
        NetConfig { dense: 6, lstm: 5, ..NetConfig::with_mode(NetMode::Vector { features: 17, actions: 12 }) },
        seed,
    )
}

fn grad_a2c() -> GradCheck {
    let mut net = small_vector_net(4);
    let mut rng = SimRng::new(5);
    net.params_mut().iter_mut().for_each(|v| *v += rng.uniform(-0.3, 0.3));
    let inputs: Vec<Vec<f64>> = (0..6).map(|_| random_vec(&mut rng, 17, 1.0)).collect();
    let actions = [0usize, 11, 3, 3, 7, 9];
    let rewards = [0.5, -1.0, 0.0, 2.0, 1.0, -0.25];
    let dones = [false, false, true, false, false, false];
    let cfg = LossConfig { gamma: 0.9, entropy_coef: 0.05, value_coef: 0.5 };
    let mut traj = Trajectory::new(net.initial_state());
    let mut s = net.initial_state();
    for (t, x) in inputs.iter().enumerate() {
        let out = net.forward_recorded(NetInput::Vector(x), &s, &mut traj.tape).unwrap();
        traj.steps.push(StepRecord {
            actions: vec![Some(actions[t])],
            probs: out.heads.clone(),
            value: out.value,
            reward: rewards[t],
            done: dones[t],
        });
        s = out.state;
    }
    traj.bootstrap = 0.7;
    let mut g = vec![0.0; net.param_count()];
    a2c_gradients(&net, std::slice::from_ref(&traj), &cfg, &mut g).unwrap();
    let values: Vec<f64> = traj.steps.iter().map(|s| s.value).collect();
    let (returns, adv) = n_step_returns(&rewards, &values, &dones, cfg.gamma, 0.7);
    let mut probe = net.clone();
    fd_check(net.params(), &g, 1e-5, |p| {
        probe.params_mut().copy_from_slice(p);
        let mut s = probe.initial_state();
        let mut loss = 0.0;
        for (t, x) in inputs.iter().enumerate() {
            let out = probe.forward(NetInput::Vector(x), &s).unwrap();
            let pr = &out.heads[0];
            loss += -adv[t] * pr[actions[t]].ln() + cfg.value_coef * (returns[t] - out.value).powi(2)
                - cfg.entropy_coef * entropy(pr);
            s = out.state;
        }
        loss
    })
}

/// Discounted sum from `t` to the episode end or the bootstrap, innermost
/// term first.
fn brute_force_return(rewards: &[f64], dones: &[bool], gamma: f64, bootstrap: f64, t: usize) -> f64 {
    let (last, tail) = match (t..rewards.len()).find(|&k| dones[k]) {
        Some(k) => (k, 0.0),
        None => (rewards.len() - 1, bootstrap),
    };
    let mut acc = tail;
    for k in (t..=last).rev() {
        acc = rewards[k] + gamma * acc;
    }
    acc
}

fn numerics() -> Outcome {
    let mut rng = SimRng::new(66);
    let spatial_cfg = NetConfig {
        mode: NetMode::Spatial { n: 4, minimap: 2, screen: 3, nonspatial: 3, ids: 3 },
        dense: 4,
        lstm: 3,
        conv1: 2,
        kernel1: 3,
        conv2: 2,
        kernel2: 3,
    };
    let spatial_inputs: Vec<[Vec<f64>; 3]> = (0..3)
        .map(|_| [random_vec(&mut rng, 32, 1.0), random_vec(&mut rng, 48, 1.0), random_vec(&mut rng, 3, 1.0)])
        .collect();
    let vector_inputs: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut rng, 17, 1.0)).collect();
    let checks = [
        ("dense", grad_dense()),
        ("conv", grad_conv()),
        ("lstm", grad_lstm()),
        (
            "vector net",
            grad_net(
                &small_vector_net(7),
                &vector_inputs.iter().map(|x| NetInput::Vector(x)).collect::<Vec<_>>(),
                &mut rng,
            ),
        ),
        (
            "spatial net",
            grad_net(
                &PolicyNet::new(spatial_cfg, 8),
                &spatial_inputs
                    .iter()
                    .map(|[m, s, n]| NetInput::Spatial { minimap: m, screen: s, nonspatial: n })
                    .collect::<Vec<_>>(),
                &mut rng,
            ),
        ),
        ("a2c loss", grad_a2c()),
    ];
    let grads_ok = checks.iter().all(|(_, c)| c.ok());

    let mut softmax_err: f64 = 0.0;
    let vector = PolicyNet::new(NetConfig::vector(), 9);
    let spatial = SpatialConfig::default();
    let spatial_net = PolicyNet::new(NetConfig::spatial(&spatial), 10);
    let plane = spatial.n * spatial.n;
    for i in 0..50 {
        let scale = [1.0, 10.0, 1000.0][i % 3];
        let x = random_vec(&mut rng, 17, scale);
        let out = vector.forward(NetInput::Vector(&x), &vector.initial_state()).unwrap();
        let m = random_vec(&mut rng, spatial.minimap_layers * plane, scale);
        let s = random_vec(&mut rng, spatial.screen_layers * plane, scale);
        let n = random_vec(&mut rng, spatial.nonspatial, scale);
        let out2 = spatial_net
            .forward(NetInput::Spatial { minimap: &m, screen: &s, nonspatial: &n }, &spatial_net.initial_state())
            .unwrap();
        for head in out.heads.iter().chain(&out2.heads) {
            softmax_err = softmax_err.max((head.iter().sum::<f64>() - 1.0).abs());
        }
    }
    let softmax_ok = softmax_err <= 1e-6;

    let mut returns_mismatch = 0;
    for len in 1..=50 {
        for trial in 0..20 {
            let rewards = random_vec(&mut rng, len, 10.0);
            let dones: Vec<bool> = (0..len).map(|_| rng.below(8) == 0).collect();
            let gamma = if trial == 0 { 1.0 } else { rng.uniform(0.5, 1.0) };
            let bootstrap = rng.uniform(-5.0, 5.0);
            let (r, _) = n_step_returns(&rewards, &vec![0.0; len], &dones, gamma, bootstrap);
            returns_mismatch +=
                (0..len).filter(|&t| r[t] != brute_force_return(&rewards, &dones, gamma, bootstrap, t)).count();
        }
    }
    let detail: Vec<String> = checks
        .iter()
        .map(|(n, c)| {
            format!(
                "{n} {:.1e} ({} below {GRAD_FLOOR:.0e}: abs {:.1e})",
                c.max_rel_error, c.small, c.max_abs_error_small
            )
        })
        .collect();
    Outcome::new(
        grads_ok && softmax_ok && returns_mismatch == 0,
        format!(
            "grad check max rel error {} (limit 1e-4, abs limit {GRAD_ABS_LIMIT:.0e} below the floor); softmax max |sum-1| {softmax_err:.1e}; n-step returns: {returns_mismatch} mismatches over lengths 1..=50",
            detail.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- 7

fn learning_sanity() -> Outcome {
    const EVAL_SEED: u64 = 1_000_000;
    let scenario = skirmish();
    let config = TrainConfig::default();
    let start = Instant::now();
    let report = train(&config, &scenario, &OpponentSpec::Scenario, None).unwrap();
    let train_secs = start.elapsed().as_secs_f64();
    let net = Arc::new(report.best.net().unwrap());
    let mut trained = LearnedCommander::new(net, &scenario, true).unwrap();
    let eval =
        |c: &mut dyn Commander| evaluate(&scenario, Force::Blue, c, 100, &OpponentSpec::Scenario, EVAL_SEED).unwrap();
    let t = eval(&mut trained);
    let r = eval(by_name("random").unwrap().as_mut());
    let d = eval(by_name("doctrine").unwrap().as_mut());
    let z = separation(&t.rewards(), &r.rewards());
    let tc = mean(&t.column(|x| x.blue_casualties as f64));
    let rc = mean(&r.column(|x| x.blue_casualties as f64));
    let win = paired_win_rate(&t.rewards(), &d.rewards());
    let pass = z >= 3.0 && tc < rc && win >= 0.6 && train_secs <= 3600.0;
    Outcome::new(
        pass,
        format!(
            "{} workers, {} env steps in {train_secs:.0}s; trained {:.3} vs random {:.3} (z = {z:.1}, need 3); blue casualties {tc:.2} vs {rc:.2}; >= doctrine ({:.3}) in {:.0}% of paired rollouts (need 60%)",
            config.workers,
            report.env_steps,
            mean(&t.rewards()),
            mean(&r.rewards()),
            mean(&d.rewards()),
            100.0 * win
        ),
    )
}

// ---------------------------------------------------------------- 8

fn blue_scores(scenario: &Arc<Scenario>, blue: &str, red: Option<&str>, seeds: std::ops::Range<u64>) -> Vec<f64> {
    let mut env = env_for(scenario, red);
    let mut policy = by_name(blue).unwrap();
    seeds.map(|s| c2sim_core::train::run_episode(&mut env, policy.as_mut(), s).unwrap().total_reward).collect()
}

fn baseline_ordering() -> Outcome {
    let s = tigerclaw();
    let doctrine = blue_scores(&s, "doctrine", None, 0..100);
    let random = blue_scores(&s, "random", None, 0..100);
    let a = paired_t_test(&doctrine, &random);
    // Head to head: the same seed played with bot 10 commanding Blue against
    // bot 1, and with the roles swapped.
    let strong = blue_scores(&s, "bot:10", Some("bot:1"), 0..100);
    let weak = blue_scores(&s, "bot:1", Some("bot:10"), 0..100);
    let b = paired_t_test(&strong, &weak);
    let pass = a.mean_diff > 0.0 && a.p_value < 0.01 && b.mean_diff > 0.0 && b.p_value < 0.01;
    Outcome::new(
        pass,
        format!(
            "doctrine {:.2} vs random {:.2} (t = {:.2}, p = {:.1e}); bot 10 vs bot 1 head to head {:.2} vs {:.2} (t = {:.2}, p = {:.1e}); limit p < 0.01",
            mean(&doctrine),
            mean(&random),
            a.t,
            a.p_value,
            mean(&strong),
            mean(&weak),
            b.t,
            b.p_value
        ),
    )
}

// ---------------------------------------------------------------- 9

fn throughput() -> Outcome {
    let s = tigerclaw();
    let one = run_bench(&s, "doctrine", 100_000, 1, 0).unwrap();
    let eight = run_bench(&s, "doctrine", 100_000, 8, 0).unwrap();
    let scaling = eight.aggregate_ticks_per_sec / one.aggregate_ticks_per_sec;
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let single_ok = one.ticks_per_sec_per_worker >= 10_000.0;
    let scaling_ok = scaling >= 5.0;
    let detail = format!(
        "single worker {:.0} ticks/s (need 10000, {:.0}x real time); 8 workers {:.0} ticks/s aggregate = {scaling:.2}x (need 5x) on {cores} core(s)",
        one.ticks_per_sec_per_worker, one.realtime_factor, eight.aggregate_ticks_per_sec
    );
    let mut o = Outcome::new(single_ok && scaling_ok, detail);
    o.unattainable = single_ok && !scaling_ok && cores < 8;
    o
}

// ---------------------------------------------------------------- 10

fn record_episode(scenario: &Arc<Scenario>, policy: &str, opponent: Option<&str>, seed: u64) -> (Replay, f64) {
    let mut env = env_for(scenario, opponent);
    let mut p = by_name(policy).unwrap();
    env.reset(seed).unwrap();
    let mut rec = Recorder::for_env(&env, seed, [policy.into(), env.opponent_name()]);
    run_episode_observed(&mut env, p.as_mut(), seed, |env, r| rec.record(r.reward, &r.info, env.world().unwrap()))
        .unwrap();
    (rec.finish(&env), env.score())
}

/// Byte ranges of every record in an encoded replay, parsed independently
/// of the decoder.
fn record_spans(bytes: &[u8]) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut pos = 5;
    while pos < bytes.len() {
        let len = u32::from_le_bytes(bytes[pos + 1..pos + 5].try_into().unwrap()) as usize;
        let end = pos + 5 + len + 8;
        spans.push((pos, end));
        pos = end;
    }
    spans
}

fn detected(bytes: &[u8], original: &Replay) -> bool {
    match Replay::decode(bytes) {
        Err(_) => true,
        Ok(r) => match r.verify(None) {
            Err(_) => true,
            Ok(v) => !v.verdict.is_exact() || (original.end.is_some() && !v.complete),
        },
    }
}

/// Forged edits that keep every checksum valid.
fn semantic_tampers(replay: &Replay, rng: &mut SimRng) -> Vec<(&'static str, Replay)> {
    let mut out = Vec::new();
    let n = replay.ticks.len();
    let pick = |rng: &mut SimRng| rng.below(n as u64) as usize;
    let mut add = |name, f: &dyn Fn(&mut Replay)| {
        let mut r = replay.clone();
        f(&mut r);
        out.push((name, r));
    };
    let t = pick(rng);
    add("reward", &|r| r.ticks[t].reward = f64::from_bits(r.ticks[t].reward.to_bits() ^ 1));
    if let Some(t) = (0..n).map(|k| (k + pick(rng)) % n).find(|&k| !replay.ticks[k].events.is_empty()) {
        let i = rng.below(replay.ticks[t].events.len() as u64) as usize;
        add("event removed", &|r| {
            r.ticks[t].events.remove(i);
        });
        add("event retargeted", &|r| {
            let e = &mut r.ticks[t].events[i];
            e.actor = UnitId((e.actor.0 + 1) % 4);
        });
        add("event amount", &|r| {
            let e = &mut r.ticks[t].events[i];
            e.amount = Some(e.amount.map_or(1, |a| a + 1));
        });
    }
    let t = pick(rng);
    add("event inserted", &|r| {
        let tick = r.ticks[t].tick;
        r.ticks[t].events.push(CombatEvent::new(EventKind::Destroyed, UnitId(0), tick).with_unit(UnitId(1)));
    });
    if let Some(t) = effective_move(replay) {
        add("order", &|r| {
            let me = r.header.controlled.index();
            for o in r.ticks[t].orders[me].iter_mut() {
                if let OrderKind::Move { dx, dy } = o.kind {
                    o.kind = OrderKind::Move { dx: -dy, dy: dx };
                    break;
                }
            }
        });
    }
    add("tick record removed", &|r| {
        r.ticks.remove(t);
    });
    let h = rng.below(replay.hashes.len() as u64) as usize;
    add("hash value", &|r| r.hashes[h].1 ^= 1 << 17);
    if replay.hashes.len() > 1 {
        add("hash record removed", &|r| {
            r.hashes.remove(1);
        });
    }
    add("header seed", &|r| r.header.seed ^= 1);
    add("header scenario hash", &|r| r.header.scenario_hash ^= 1);
    add("header controlled force", &|r| r.header.controlled = r.header.controlled.opponent());
    assert!(replay.end.is_some(), "complete episode");
    let mut end_edit = |name, f: fn(&mut EndRecord)| add(name, &move |r: &mut Replay| f(r.end.as_mut().unwrap()));
    end_edit("end ticks", |e| e.ticks += 1);
    end_edit("end score", |e| e.score += 1.0);
    end_edit("end casualties", |e| e.casualties[1] += 1);
    end_edit("end hash", |e| e.final_hash ^= 1);
    end_edit("end termination", |e| {
        e.termination = Some(if e.termination == Some(Termination::MaxTicks) {
            Termination::ForceDestroyed
        } else {
            Termination::MaxTicks
        })
    });
    out
}

/// A tick where a controlled unit's first move order actually displaced it.
fn effective_move(replay: &Replay) -> Option<usize> {
    let scenario = replay.scenario().ok()?;
    let mut world = build_world(&scenario, replay.header.seed).ok()?;
    let me = replay.header.controlled;
    for (t, rec) in replay.ticks.iter().enumerate() {
        let mover = rec.orders[me.index()]
            .iter()
            .find(|o| matches!(o.kind, OrderKind::Move { dx, dy } if dx != 0.0 || dy != 0.0));
        let before = mover.map(|o| world.units[o.unit.index()].position);
        let orders: Vec<Order> =
            rec.orders[me.index()].iter().chain(&rec.orders[me.opponent().index()]).cloned().collect();
        advance_tick(&mut world, &orders).ok()?;
        if let (Some(o), Some(p)) = (mover, before) {
            let blocked = rec.events.iter().any(|e| e.kind == EventKind::MoveBlocked && e.actor == o.unit);
            let orders_for_unit = rec.orders[me.index()]
                .iter()
                .filter(|x| x.unit == o.unit && matches!(x.kind, OrderKind::Move { .. }))
                .count();
            if world.units[o.unit.index()].position != p && !blocked && orders_for_unit == 1 {
                return Some(t);
            }
        }
    }
    None
}

fn replay_integrity() -> Outcome {
    let pool = [tigerclaw(), skirmish()];
    let policies = ["random", "doctrine", "bot:3", "bot:9"];
    let mut rng = SimRng::new(0x7e9);
    let (mut exact, mut byte_tampers, mut byte_missed, mut forged, mut forged_missed) = (0, 0, 0, 0, 0);
    let mut missed_kinds = BTreeSet::new();
    let mut problems = Vec::new();
    for i in 0..100u64 {
        let scenario = &pool[(i % 2) as usize];
        let (replay, score) = record_episode(scenario, policies[(i / 2 % 4) as usize], None, 500 + i);
        let bytes = replay.encode();
        let decoded = Replay::decode(&bytes).unwrap();
        let v = decoded.verify(Some(scenario)).unwrap();
        if decoded == replay && v.verdict == Verdict::Exact && v.complete && v.ledger_score.to_bits() == score.to_bits()
        {
            exact += 1;
        } else if problems.len() < 3 {
            problems.push(format!("episode {i}: {}", v.verdict));
        }
        if replay.hashes.iter().any(|(t, _)| t % HASH_INTERVAL != 0) {
            problems.push(format!("episode {i}: off-interval hash"));
        }
        for (start, end) in record_spans(&bytes) {
            let mut b = bytes.clone();
            let at = start + rng.below((end - start) as u64) as usize;
            b[at] ^= 1 << rng.below(8);
            byte_tampers += 1;
            if !detected(&b, &replay) {
                byte_missed += 1;
            }
        }
        for (kind, r) in semantic_tampers(&replay, &mut rng) {
            forged += 1;
            if !detected(&r.encode(), &replay) {
                forged_missed += 1;
                missed_kinds.insert(kind);
            }
        }
    }
    let pass = exact == 100 && byte_missed == 0 && forged_missed == 0 && problems.is_empty();
    Outcome::new(
        pass,
        format!(
            "{exact}/100 episodes verify exact; {byte_tampers} single-byte record corruptions, {byte_missed} missed; {forged} re-checksummed forgeries, {forged_missed} missed{}{}",
            if missed_kinds.is_empty() { String::new() } else { format!(" ({missed_kinds:?})") },
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    )
}
