//! Declarative scenario files: parsing, validation, world instantiation and
//! the built-in desk-scale scenarios.

mod builtin;
mod schema;

pub use builtin::{builtin_skirmish, builtin_tigerclaw};
pub use schema::{
    AttributeOverrides, ControllerSpec, Goals, Randomization, RewardScheme, Scenario, TerrainSpec, UnitSpec, Violation,
};

use std::sync::Arc;

use thiserror::Error;

use crate::rng::SimRng;
use crate::sim::{CombatRules, CrossingZones, Force, Pos, Region, TerrainGrid, Unit, UnitId, WorldState};

/// Every violation found in a scenario document.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{} scenario violation(s): {}", .0.len(), .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ValidationErrors(pub Vec<Violation>);

/// Units spawn moving at this fraction of their maximum speed.
pub const INITIAL_SPEED_FRACTION: f64 = 0.6;

const MAX_SPAWN_REDRAWS: usize = 16;
const JITTER_SALT: u64 = 0x6a69_7474_6572;

/// Parse and fully validate a UTF-8 JSON scenario document.
pub fn parse_scenario(text: &[u8]) -> Result<Scenario, ValidationErrors> {
    schema::parse(text)
}

pub fn serialize_scenario(scenario: &Scenario) -> String {
    serde_json::to_string_pretty(scenario).expect("scenario serialization is infallible")
}

/// True iff the cell under `position` lies in any of the region's rectangles.
pub fn region_contains(region: &Region, position: Pos) -> bool {
    region.contains(position)
}

/// Instantiate a world. Units get ids in roster order; spawn jitter and
/// attribute noise are drawn from a stream derived from `seed`, and the
/// world rng is seeded with `seed` itself.
pub fn build_world(scenario: &Scenario, seed: u64) -> Result<WorldState, ValidationErrors> {
    let terrain = Arc::new(
        scenario
            .terrain
            .build(scenario.cell_km)
            .map_err(|e| ValidationErrors(vec![Violation::Terrain(e.to_string())]))?,
    );
    let mut jitter = SimRng::derived(seed, JITTER_SALT);
    let rand = scenario.randomization.clone().unwrap_or_default();
    let mut units = Vec::new();
    for (entry, spec) in scenario.roster.iter().enumerate() {
        for _ in 0..spec.count {
            let id = UnitId(units.len() as u32);
            let position = if rand.spawn_jitter > 0.0 {
                jittered_spawn(&terrain, spec.spawn, rand.spawn_jitter, &mut jitter)
                    .ok_or_else(|| ValidationErrors(vec![Violation::JitterExhausted { entry }]))?
            } else {
                spec.spawn
            };
            let mut unit = spec.instantiate(id, position, scenario.goals.of(spec.force));
            if rand.attribute_noise > 0.0 {
                let f = rand.attribute_noise;
                unit.weapon_range *= 1.0 + jitter.uniform(-f, f);
                unit.sensor_range *= 1.0 + jitter.uniform(-f, f);
                unit.speed_max *= 1.0 + jitter.uniform(-f, f);
                unit.speed = unit.speed_max * INITIAL_SPEED_FRACTION;
            }
            units.push(unit);
        }
    }
    let crossing = scenario.crossing_pair.as_ref().map(|(near, far)| {
        Arc::new(CrossingZones {
            near: scenario.region(near).expect("validated").clone(),
            far: scenario.region(far).expect("validated").clone(),
        })
    });
    let rules = CombatRules { stochastic: rand.stochastic_fire, accuracy: rand.accuracy, ..CombatRules::default() };
    WorldState::new(terrain, scenario.tick_seconds, units, SimRng::new(seed), rules, crossing)
        .map_err(|e| ValidationErrors(vec![Violation::Terrain(e.to_string())]))
}

fn jittered_spawn(terrain: &TerrainGrid, spawn: Pos, radius: f64, rng: &mut SimRng) -> Option<Pos> {
    (0..MAX_SPAWN_REDRAWS).find_map(|_| {
        let p = spawn.offset(rng.uniform(-radius, radius), rng.uniform(-radius, radius));
        terrain.traversable(p).then_some(p)
    })
}

impl UnitSpec {
    fn instantiate(&self, id: UnitId, position: Pos, goal: Pos) -> Unit {
        let p = self.unit_class.profile();
        let o = &self.overrides;
        let speed_max = o.speed_max.unwrap_or(p.speed_max_kmh);
        let strength = o.strength.unwrap_or(p.strength);
        let ammo = o.ammo.unwrap_or(p.ammo);
        Unit {
            id,
            force: self.force,
            class: self.unit_class,
            position,
            heading: position.bearing_to(goal),
            speed: speed_max * INITIAL_SPEED_FRACTION,
            speed_max,
            strength,
            strength_max: strength,
            weapon_range: o.weapon_range.unwrap_or(p.weapon_range_km),
            weapon_damage: o.weapon_damage.unwrap_or(p.weapon_damage),
            shots_per_tick: o.shots_per_tick.unwrap_or(p.shots_per_tick),
            sensor_range: o.sensor_range.unwrap_or(p.sensor_range_km),
            ammo,
            ammo_max: ammo,
            fuel_consumed: 0.0,
            fuel_capacity: p.fuel_capacity,
            fuel_rate: o.fuel_rate.unwrap_or(p.fuel_rate),
            passive: self.passive.unwrap_or(self.force == Force::Blue),
            indirect: p.indirect,
            bank: None,
        }
    }
}
