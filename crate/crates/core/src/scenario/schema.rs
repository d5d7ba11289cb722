use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ValidationErrors;
use crate::commanders::{CoaScript, DoctrineRule};
use crate::sim::{Cell, CellPos, Force, Pos, Region, SimError, TerrainGrid, UnitClass};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Violation {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("roster entry {entry}: unknown unit class {name:?}")]
    UnknownClass { entry: usize, name: String },
    #[error("roster entry {entry}: unknown force {name:?}")]
    UnknownForce { entry: usize, name: String },
    #[error("roster entry {entry}: count must be >= 1")]
    BadCount { entry: usize },
    #[error("roster entry {entry}: override {field} must be positive")]
    NonPositiveOverride { entry: usize, field: &'static str },
    #[error("roster entry {entry}: spawn out of bounds")]
    SpawnOutOfBounds { entry: usize },
    #[error("roster entry {entry}: spawn on impassable terrain")]
    SpawnNotTraversable { entry: usize },
    #[error("roster entry {entry}: no traversable jittered spawn after 16 draws")]
    JitterExhausted { entry: usize },
    #[error("terrain: {0}")]
    Terrain(String),
    #[error("duplicate region name {0:?}")]
    DuplicateRegion(String),
    #[error("region {0:?} has no rectangles")]
    EmptyRegion(String),
    #[error("region {0:?} has a malformed or out-of-bounds rectangle")]
    RegionOutOfBounds(String),
    #[error("unknown region {0:?}")]
    UnknownRegion(String),
    #[error("{0:?} goal is out of bounds")]
    GoalOutOfBounds(Force),
    #[error("max_ticks must be >= 1")]
    BadMaxTicks,
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("bot level {0} outside 1..=10")]
    BadBotLevel(u8),
    #[error("course of action: {0}")]
    Coa(String),
    #[error("doctrine rules: {0}")]
    Doctrine(String),
    #[error("randomization: {0}")]
    Randomization(String),
    #[error("reward scheme: {0}")]
    Reward(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TerrainSpec {
    Open {
        width: usize,
        height: usize,
    },
    /// Explicit rows of `.` (open), `#` (impassable), `=` (crossing).
    Rows {
        rows: Vec<String>,
    },
    /// Open map with a vertical impassable band `[band_x, band_x + band_width)`
    /// pierced by crossing corridors given as inclusive `[y0, y1]` spans.
    Wadi {
        width: usize,
        height: usize,
        band_x: usize,
        band_width: usize,
        crossings: Vec<[usize; 2]>,
    },
}

impl TerrainSpec {
    pub fn build(&self, cell_km: f64) -> Result<TerrainGrid, SimError> {
        match self {
            TerrainSpec::Open { width, height } => TerrainGrid::open(*width, *height, cell_km),
            TerrainSpec::Rows { rows } => TerrainGrid::from_rows(rows, cell_km),
            TerrainSpec::Wadi { width, height, band_x, band_width, crossings } => {
                let mut grid = TerrainGrid::open(*width, *height, cell_km)?;
                if band_x + band_width > *width || *band_width == 0 {
                    return Err(SimError::InvalidTerrain("wadi band outside the map".into()));
                }
                for y in 0..*height {
                    let crossing = crossings.iter().any(|[y0, y1]| (*y0..=*y1).contains(&y));
                    for x in *band_x..band_x + band_width {
                        let cell = if crossing { Cell::Crossing } else { Cell::Impassable };
                        grid.set(CellPos::new(x as i32, y as i32), cell);
                    }
                }
                Ok(grid)
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weapon_range: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weapon_damage: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots_per_tick: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensor_range: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ammo: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fuel_rate: Option<f64>,
}

impl AttributeOverrides {
    fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    fn non_positive(&self) -> Vec<&'static str> {
        let reals = [
            ("weapon_range", self.weapon_range),
            ("speed_max", self.speed_max),
            ("sensor_range", self.sensor_range),
            ("fuel_rate", self.fuel_rate),
        ];
        let ints = [
            ("weapon_damage", self.weapon_damage),
            ("shots_per_tick", self.shots_per_tick),
            ("strength", self.strength),
            ("ammo", self.ammo),
        ];
        reals
            .iter()
            .filter(|(_, v)| v.is_some_and(|v| !(v > 0.0 && v.is_finite())))
            .map(|(n, _)| *n)
            .chain(ints.iter().filter(|(_, v)| *v == Some(0)).map(|(n, _)| *n))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnitSpec {
    pub unit_class: UnitClass,
    pub force: Force,
    pub spawn: Pos,
    pub count: u32,
    #[serde(skip_serializing_if = "AttributeOverrides::is_empty")]
    pub overrides: AttributeOverrides,
    /// MIL-STD-2525-style symbol identifier; display metadata only.
    #[serde(skip_serializing_if = "String::is_empty")]
    pub symbol_code: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub passive: Option<bool>,
}

impl UnitSpec {
    pub fn new(unit_class: UnitClass, force: Force, spawn: Pos) -> Self {
        Self {
            unit_class,
            force,
            spawn,
            count: 1,
            overrides: AttributeOverrides::default(),
            symbol_code: String::new(),
            passive: None,
        }
    }

    pub fn count(mut self, count: u32) -> Self {
        self.count = count;
        self
    }

    pub fn symbol(mut self, code: &str) -> Self {
        self.symbol_code = code.to_string();
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Goals {
    pub blue: Pos,
    pub red: Pos,
}

impl Goals {
    pub fn of(&self, force: Force) -> Pos {
        match force {
            Force::Blue => self.blue,
            Force::Red => self.red,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RewardScheme {
    /// Region-trigger game score, scored for Blue.
    Tigerclaw {
        #[serde(default = "ten")]
        crossed: f64,
        #[serde(default = "minus_ten")]
        retreated: f64,
        #[serde(default = "ten")]
        enemy_destroyed: f64,
        #[serde(default = "minus_ten")]
        friendly_destroyed: f64,
    },
    /// Damage/destruction events plus a per-step distance-to-goal penalty.
    Attrition {
        #[serde(default = "attrition_defaults::friendly_damaged")]
        friendly_damaged: f64,
        #[serde(default = "attrition_defaults::friendly_destroyed")]
        friendly_destroyed: f64,
        #[serde(default = "attrition_defaults::enemy_damaged")]
        enemy_damaged: f64,
        #[serde(default = "attrition_defaults::enemy_destroyed")]
        enemy_destroyed: f64,
        #[serde(default = "attrition_defaults::km_penalty")]
        km_penalty: f64,
    },
}

fn ten() -> f64 {
    10.0
}

fn minus_ten() -> f64 {
    -10.0
}

mod attrition_defaults {
    pub fn friendly_damaged() -> f64 {
        -0.5
    }
    pub fn friendly_destroyed() -> f64 {
        -1.0
    }
    pub fn enemy_damaged() -> f64 {
        0.5
    }
    pub fn enemy_destroyed() -> f64 {
        1.0
    }
    pub fn km_penalty() -> f64 {
        0.01
    }
}

impl RewardScheme {
    pub fn tigerclaw() -> Self {
        RewardScheme::Tigerclaw { crossed: 10.0, retreated: -10.0, enemy_destroyed: 10.0, friendly_destroyed: -10.0 }
    }

    pub fn attrition() -> Self {
        RewardScheme::Attrition {
            friendly_damaged: -0.5,
            friendly_destroyed: -1.0,
            enemy_damaged: 0.5,
            enemy_destroyed: 1.0,
            km_penalty: 0.01,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RewardScheme::Tigerclaw { .. } => "tigerclaw",
            RewardScheme::Attrition { .. } => "attrition",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerSpec {
    Scripted {
        coa: CoaScript,
    },
    Bot {
        level: u8,
    },
    /// Rule engine; `rules` replaces the default rule set when present.
    Doctrine {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rules: Option<Vec<DoctrineRule>>,
    },
    External,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Randomization {
    /// Spawn offsets drawn uniformly from `[-r, r]²` cells.
    #[serde(default)]
    pub spawn_jitter: f64,
    /// Multiplicative noise `1 ± f` on weapon range, sensor range and speed.
    #[serde(default)]
    pub attribute_noise: f64,
    /// Bernoulli hit model instead of fixed per-shot damage.
    #[serde(default)]
    pub stochastic_fire: bool,
    #[serde(default = "default_accuracy")]
    pub accuracy: f64,
}

fn default_accuracy() -> f64 {
    0.8
}

impl Default for Randomization {
    fn default() -> Self {
        Self { spawn_jitter: 0.0, attribute_noise: 0.0, stochastic_fire: false, accuracy: default_accuracy() }
    }
}

/// A fully validated scenario. Immutable once built; share freely.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub terrain: TerrainSpec,
    pub roster: Vec<UnitSpec>,
    pub regions: Vec<Region>,
    pub crossing_pair: Option<(String, String)>,
    pub goals: Goals,
    pub reward_scheme: RewardScheme,
    pub max_ticks: u64,
    pub red_controller: ControllerSpec,
    pub tick_seconds: f64,
    pub cell_km: f64,
    pub randomization: Option<Randomization>,
}

impl Scenario {
    pub fn region(&self, name: &str) -> Option<&Region> {
        self.regions.iter().find(|r| r.name == name)
    }

    pub fn objective_regions(&self) -> impl Iterator<Item = &Region> {
        self.regions.iter().filter(|r| r.objective)
    }

    /// Units fielded by `force` (sum of roster counts).
    pub fn force_size(&self, force: Force) -> usize {
        self.roster.iter().filter(|s| s.force == force).map(|s| s.count as usize).sum()
    }

    /// Stable digest of the canonical serialization.
    pub fn content_hash(&self) -> u64 {
        crate::hash::hash_bytes(serde_json::to_string(self).expect("serializable").as_bytes())
    }

    /// Check every semantic invariant, collecting all violations.
    pub fn validate(&self) -> Result<(), ValidationErrors> {
        let mut v = Vec::new();
        let terrain = match self.terrain.build(self.cell_km.max(f64::MIN_POSITIVE)) {
            Ok(t) => Some(t),
            Err(e) => {
                v.push(Violation::Terrain(e.to_string()));
                None
            }
        };
        if !(self.cell_km > 0.0 && self.cell_km.is_finite()) {
            v.push(Violation::NonPositive("cell_km"));
        }
        if !(self.tick_seconds > 0.0 && self.tick_seconds.is_finite()) {
            v.push(Violation::NonPositive("tick_seconds"));
        }
        if self.max_ticks < 1 {
            v.push(Violation::BadMaxTicks);
        }
        for (entry, spec) in self.roster.iter().enumerate() {
            if spec.count < 1 {
                v.push(Violation::BadCount { entry });
            }
            for field in spec.overrides.non_positive() {
                v.push(Violation::NonPositiveOverride { entry, field });
            }
            if let Some(t) = &terrain {
                if !t.in_bounds(spec.spawn) {
                    v.push(Violation::SpawnOutOfBounds { entry });
                } else if !t.traversable(spec.spawn) {
                    v.push(Violation::SpawnNotTraversable { entry });
                }
            }
        }
        let mut names = HashSet::new();
        for r in &self.regions {
            if !names.insert(r.name.as_str()) {
                v.push(Violation::DuplicateRegion(r.name.clone()));
            }
            if r.rects.is_empty() {
                v.push(Violation::EmptyRegion(r.name.clone()));
            }
            if let Some(t) = &terrain {
                let ok = r.rects.iter().all(|rc| {
                    rc.is_well_formed()
                        && t.in_bounds_cell(CellPos::new(rc.x0, rc.y0))
                        && t.in_bounds_cell(CellPos::new(rc.x1, rc.y1))
                });
                if !ok {
                    v.push(Violation::RegionOutOfBounds(r.name.clone()));
                }
            }
        }
        if let Some((near, far)) = &self.crossing_pair {
            for name in [near, far] {
                if !names.contains(name.as_str()) {
                    v.push(Violation::UnknownRegion(name.clone()));
                }
            }
        }
        if let Some(t) = &terrain {
            for force in Force::BOTH {
                if !t.in_bounds(self.goals.of(force)) {
                    v.push(Violation::GoalOutOfBounds(force));
                }
            }
        }
        match &self.reward_scheme {
            RewardScheme::Tigerclaw { crossed, retreated, enemy_destroyed, friendly_destroyed } => {
                if ![crossed, retreated, enemy_destroyed, friendly_destroyed].iter().all(|x| x.is_finite()) {
                    v.push(Violation::Reward("non-finite constant".into()));
                }
            }
            RewardScheme::Attrition {
                friendly_damaged,
                friendly_destroyed,
                enemy_damaged,
                enemy_destroyed,
                km_penalty,
            } => {
                if ![friendly_damaged, friendly_destroyed, enemy_damaged, enemy_destroyed, km_penalty]
                    .iter()
                    .all(|x| x.is_finite())
                {
                    v.push(Violation::Reward("non-finite constant".into()));
                }
            }
        }
        match &self.red_controller {
            ControllerSpec::Bot { level } if !(1..=10).contains(level) => v.push(Violation::BadBotLevel(*level)),
            ControllerSpec::Scripted { coa } => {
                if let Err(e) = coa.validate(terrain.as_ref(), self.force_size(Force::Red)) {
                    v.push(Violation::Coa(e));
                }
            }
            ControllerSpec::Doctrine { rules: Some(rules) } => {
                if let Err(e) = crate::commanders::validate_rules(rules) {
                    v.push(Violation::Doctrine(e));
                }
            }
            _ => {}
        }
        if let Some(r) = &self.randomization {
            if !(r.spawn_jitter >= 0.0 && r.spawn_jitter.is_finite()) {
                v.push(Violation::Randomization("spawn_jitter must be >= 0".into()));
            }
            if !(0.0..1.0).contains(&r.attribute_noise) {
                v.push(Violation::Randomization("attribute_noise must lie in [0, 1)".into()));
            }
            if !(0.0..=1.0).contains(&r.accuracy) {
                v.push(Violation::Randomization("accuracy must lie in [0, 1]".into()));
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(ValidationErrors(v))
        }
    }
}

// Wire form: identical to `Scenario` except class and force stay strings so
// that unknown names surface as semantic violations, not syntax errors.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    terrain: TerrainSpec,
    roster: Vec<RawUnitSpec>,
    regions: Vec<Region>,
    crossing_pair: Option<(String, String)>,
    goals: Goals,
    reward_scheme: RewardScheme,
    max_ticks: u64,
    red_controller: ControllerSpec,
    tick_seconds: f64,
    cell_km: f64,
    #[serde(default)]
    randomization: Option<Randomization>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUnitSpec {
    unit_class: String,
    force: String,
    spawn: Pos,
    #[serde(default = "one")]
    count: u32,
    #[serde(default)]
    overrides: AttributeOverrides,
    #[serde(default)]
    symbol_code: String,
    #[serde(default)]
    passive: Option<bool>,
}

fn one() -> u32 {
    1
}

pub(super) fn parse(text: &[u8]) -> Result<Scenario, ValidationErrors> {
    let raw: RawScenario = serde_json::from_slice(text).map_err(|e| {
        ValidationErrors(vec![Violation::Syntax { line: e.line(), column: e.column(), message: e.to_string() }])
    })?;
    let mut violations = Vec::new();
    let mut roster = Vec::with_capacity(raw.roster.len());
    for (entry, r) in raw.roster.into_iter().enumerate() {
        let class = UnitClass::parse(&r.unit_class);
        let force = Force::parse(&r.force);
        if class.is_none() {
            violations.push(Violation::UnknownClass { entry, name: r.unit_class.clone() });
        }
        if force.is_none() {
            violations.push(Violation::UnknownForce { entry, name: r.force.clone() });
        }
        roster.push(UnitSpec {
            unit_class: class.unwrap_or(UnitClass::Infantry),
            force: force.unwrap_or(Force::Blue),
            spawn: r.spawn,
            count: r.count,
            overrides: r.overrides,
            symbol_code: r.symbol_code,
            passive: r.passive,
        });
    }
    let scenario = Scenario {
        name: raw.name,
        terrain: raw.terrain,
        roster,
        regions: raw.regions,
        crossing_pair: raw.crossing_pair,
        goals: raw.goals,
        reward_scheme: raw.reward_scheme,
        max_ticks: raw.max_ticks,
        red_controller: raw.red_controller,
        tick_seconds: raw.tick_seconds,
        cell_km: raw.cell_km,
        randomization: raw.randomization,
    };
    if let Err(ValidationErrors(more)) = scenario.validate() {
        violations.extend(more);
    }
    if violations.is_empty() {
        Ok(scenario)
    } else {
        Err(ValidationErrors(violations))
    }
}
