use std::collections::BTreeSet;

use c2sim_core::env::{encode_spatial_obs, encode_vector_obs, ForceView, RouteCache, SpatialConfig};
use c2sim_core::rng::SimRng;
use c2sim_core::scenario::{
    build_world, builtin_skirmish, builtin_tigerclaw, parse_scenario, serialize_scenario, Randomization, Scenario,
};
use c2sim_core::sim::{
    advance_tick, force_picture, visible_enemies, CellPos, CombatEvent, EventKind, Force, Order, OrderKind, Pos,
    UnitId, WorldState,
};
use proptest::prelude::*;

fn scenario(which: u8, randomized: bool) -> Scenario {
    let mut s = if which.is_multiple_of(2) { builtin_tigerclaw() } else { builtin_skirmish() };
    if randomized {
        s.randomization =
            Some(Randomization { spawn_jitter: 1.5, attribute_noise: 0.2, stochastic_fire: true, accuracy: 0.7 });
    }
    s
}

/// Well-formed but otherwise arbitrary orders, including ones the engine
/// must refuse with a diagnostic (friendly fire, dead actors, overlong moves).
fn random_orders(world: &WorldState, rng: &mut SimRng) -> Vec<Order> {
    let n = world.units.len();
    let (w, h) = (world.terrain.width() as i32, world.terrain.height() as i32);
    let mut orders = Vec::new();
    for u in &world.units {
        for _ in 0..rng.below(3) {
            let kind = match rng.below(6) {
                0 => OrderKind::SetSpeed { kmh: rng.uniform(0.0, 1.5 * u.speed_max) },
                1 => OrderKind::SetHeading { radians: rng.uniform(-10.0, 10.0) },
                2 => OrderKind::Move { dx: rng.uniform(-6.0, 6.0), dy: rng.uniform(-6.0, 6.0) },
                3 => OrderKind::Fire { target: UnitId(rng.below(n as u64) as u32) },
                4 => OrderKind::CallForFire {
                    cell: CellPos::new(rng.below(w as u64) as i32, rng.below(h as u64) as i32),
                },
                _ => OrderKind::HoldFire,
            };
            orders.push(Order::new(u.id, kind));
        }
    }
    orders
}

fn amount_sum(events: &[CombatEvent], kind: EventKind, actor: UnitId) -> u32 {
    events.iter().filter(|e| e.kind == kind && e.actor == actor).filter_map(|e| e.amount).sum()
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
            let km = ((e.position.x - o.position.x).powi(2) + (e.position.y - o.position.y).powi(2)).sqrt()
                * world.terrain.cell_km();
            km <= o.sensor_range
        })
        .map(|e| e.id)
        .collect()
}

fn run(which: u8, randomized: bool, seed: u64, ticks: usize) -> (WorldState, Vec<u64>) {
    let s = scenario(which, randomized);
    let mut world = build_world(&s, seed).unwrap();
    let mut rng = SimRng::new(seed ^ 0x5eed);
    let mut hashes = Vec::new();
    for _ in 0..ticks {
        let orders = random_orders(&world, &mut rng);
        advance_tick(&mut world, &orders).unwrap();
        hashes.push(world.state_hash());
    }
    (world, hashes)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fuzzed_orders_respect_unit_invariants(which in 0u8..2, randomized in any::<bool>(), seed in any::<u64>()) {
        let s = scenario(which, randomized);
        let mut world = build_world(&s, seed).unwrap();
        let mut rng = SimRng::new(seed);
        for _ in 0..80 {
            let before = world.units.clone();
            let orders = random_orders(&world, &mut rng);
            let events = advance_tick(&mut world, &orders).unwrap();
            let missions_called = events.iter().any(|e| e.kind == EventKind::FireMissionCalled);
            prop_assert_eq!(world.units.len(), before.len());
            for (old, new) in before.iter().zip(&world.units) {
                prop_assert!(world.terrain.traversable(new.position), "{:?} on impassable {:?}", new.id, new.position);
                prop_assert!(new.strength <= old.strength);
                prop_assert!(new.ammo <= old.ammo);
                prop_assert!(new.fuel_consumed >= old.fuel_consumed);
                prop_assert!(new.speed >= 0.0 && new.speed <= new.speed_max);
                if !old.alive() {
                    prop_assert_eq!(new.position, old.position);
                    prop_assert_eq!(new.strength, 0);
                }
                prop_assert_eq!(old.strength - new.strength, amount_sum(&events, EventKind::Damaged, new.id));
                let destroyed = events.iter().any(|e| e.kind == EventKind::Destroyed && e.actor == new.id);
                prop_assert_eq!(destroyed, old.alive() && !new.alive());
                let fired = amount_sum(&events, EventKind::Fired, new.id);
                if missions_called {
                    prop_assert!(old.ammo - new.ammo >= fired);
                } else {
                    prop_assert_eq!(old.ammo - new.ammo, fired);
                }
            }
        }
    }

    #[test]
    fn sensing_matches_brute_force(which in 0u8..2, randomized in any::<bool>(), seed in any::<u64>(), ticks in 0usize..60) {
        let (world, _) = run(which, randomized, seed, ticks);
        for force in [Force::Blue, Force::Red] {
            let mut union = BTreeSet::new();
            for u in world.units.iter().filter(|u| u.force == force) {
                let got: BTreeSet<UnitId> = visible_enemies(&world, u.id).into_iter().collect();
                let want = brute_force_visible(&world, u.id);
                prop_assert_eq!(&got, &want);
                union.extend(want);
            }
            let picture: BTreeSet<UnitId> = force_picture(&world, force).into_iter().collect();
            prop_assert_eq!(picture, union);
        }
    }

    #[test]
    fn observations_ignore_unseen_enemies(which in 0u8..2, seed in any::<u64>(), ticks in 0usize..40) {
        let s = scenario(which, false);
        let (world, _) = run(which, false, seed, ticks);
        let routes = RouteCache::new(world.terrain.clone());
        let spatial = SpatialConfig::default();
        let objectives: Vec<_> = s.objective_regions().cloned().collect();
        let mut rng = SimRng::new(seed.rotate_left(7));
        for force in [Force::Blue, Force::Red] {
            let goal = s.goals.of(force);
            let seen: BTreeSet<UnitId> = force_picture(&world, force).into_iter().collect();
            let observe = |w: &WorldState| {
                let view = ForceView::new(w, force, goal, false, &routes);
                let vectors: Vec<_> = view.friendly().map(|u| encode_vector_obs(&view, u.id, goal).unwrap()).collect();
                (vectors, encode_spatial_obs(&view, &spatial, &objectives))
            };
            let mut perturbed = world.clone();
            for e in perturbed.units.iter_mut().filter(|e| e.force != force && e.alive() && !seen.contains(&e.id)) {
                e.strength = 1 + rng.below(e.strength_max as u64) as u32;
                e.ammo = rng.below(e.ammo_max as u64 + 1) as u32;
                e.heading = rng.uniform(-3.0, 3.0);
                e.speed = rng.uniform(0.0, e.speed_max);
                e.fuel_consumed = rng.uniform(0.0, e.fuel_capacity);
                e.weapon_range *= rng.uniform(0.5, 2.0);
            }
            for e in perturbed.units.iter_mut().filter(|e| e.force != force && !e.alive()) {
                e.ammo = 0;
                e.heading += 1.0;
            }
            prop_assert_eq!(force_picture(&perturbed, force), force_picture(&world, force));
            prop_assert_eq!(observe(&world), observe(&perturbed));
        }
    }

    #[test]
    fn same_seed_and_orders_replay_identically(which in 0u8..2, randomized in any::<bool>(), seed in any::<u64>()) {
        let (a, ha) = run(which, randomized, seed, 40);
        let (b, hb) = run(which, randomized, seed, 40);
        prop_assert_eq!(ha, hb);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn scenario_serialization_round_trips(
        which in 0u8..2,
        max_ticks in 1u64..5000,
        tick_seconds in 1.0f64..600.0,
        jitter in proptest::option::of((0.0f64..2.0, 0.0f64..0.5, any::<bool>(), 0.05f64..1.0)),
        count in 1u32..4,
        dx in -0.49f64..0.49,
    ) {
        let mut s = scenario(which, false);
        s.max_ticks = max_ticks;
        s.tick_seconds = tick_seconds;
        s.randomization = jitter.map(|(spawn_jitter, attribute_noise, stochastic_fire, accuracy)| Randomization {
            spawn_jitter,
            attribute_noise,
            stochastic_fire,
            accuracy,
        });
        s.roster[0].count = count;
        s.roster[0].spawn = Pos::new(s.roster[0].spawn.x + dx, s.roster[0].spawn.y);
        let text = serialize_scenario(&s);
        let back = parse_scenario(text.as_bytes());
        prop_assert!(back.is_ok(), "{:?}", back.err());
        let back = back.unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(back.content_hash(), s.content_hash());
        prop_assert_eq!(serialize_scenario(&back), text);
    }
}
