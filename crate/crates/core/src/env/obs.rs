use serde::{Deserialize, Serialize};

use super::view::ForceView;
use super::EnvError;
use crate::sim::{Cell, CellPos, Pos, Region, UnitClass, UnitId};

pub const VECTOR_FEATURES: usize = 17;

pub const FEATURE_NAMES: [&str; VECTOR_FEATURES] = [
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

/// Index of a named feature in the vector observation.
pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|n| *n == name)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// The 17-feature observation of one living unit, built from its force's
/// view. Every entry is clamped to [0, 1].
pub fn encode_vector_obs(view: &ForceView, unit: UnitId, goal: Pos) -> Result<[f64; VECTOR_FEATURES], EnvError> {
    let u = view.friendly().find(|u| u.id == unit).ok_or(EnvError::NotControllable(unit))?;
    let t = view.terrain();
    let diag = t.diagonal_km();
    let smax = u.strength_max as f64;
    let loss = ratio(smax - u.strength as f64, smax);
    let amax = u.ammo_max as f64;
    let fire_support = view.nearest_enemy(u.position).is_some_and(|e| view.indirect_support_on(e.position));
    let bearing = u.position.bearing_to(goal) / std::f64::consts::TAU;
    let f = [
        loss,
        u.position.x / t.width() as f64,
        u.position.y / t.height() as f64,
        loss,
        ratio(u.weapon_range, diag),
        ratio(u.sensor_range, diag),
        ratio(u.fuel_consumed, u.fuel_capacity),
        ratio(amax - u.ammo as f64, amax),
        ratio(u.ammo as f64, amax),
        u.class.index() as f64 / 6.0,
        u.speed_max / UnitClass::global_max_speed_kmh(),
        ratio(view.enemy_count() as f64, view.initial_enemies as f64),
        ratio(view.distance_km(u.position, goal), diag),
        if u.position == goal { 0.0 } else { bearing },
        fire_support as u8 as f64,
        view.was_hit(u.id) as u8 as f64,
        view.fired(u.id) as u8 as f64,
    ];
    Ok(f.map(|v| if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialConfig {
    /// Side of every square layer.
    pub n: usize,
    pub minimap_layers: usize,
    pub screen_layers: usize,
    pub nonspatial: usize,
}

impl Default for SpatialConfig {
    fn default() -> Self {
        Self { n: 16, minimap_layers: MINIMAP_LAYERS, screen_layers: SCREEN_LAYERS, nonspatial: NONSPATIAL }
    }
}

pub const MINIMAP_LAYERS: usize = 7;
pub const SCREEN_LAYERS: usize = 13;
pub const NONSPATIAL: usize = 13;

pub const MINIMAP_NAMES: [&str; MINIMAP_LAYERS] = [
    "friendly_presence",
    "enemy_presence",
    "passability",
    "crossing_cells",
    "objective_regions",
    "friendly_strength",
    "enemy_strength",
];

pub const SCREEN_NAMES: [&str; SCREEN_LAYERS] = [
    "friendly_armor",
    "friendly_mech_infantry",
    "friendly_mortar",
    "friendly_aviation",
    "friendly_artillery",
    "friendly_anti_armor",
    "friendly_infantry",
    "enemy_presence",
    "enemy_strength",
    "taking_fire",
    "fired",
    "goal_marker",
    "unit_density",
];

pub const NONSPATIAL_NAMES: [&str; NONSPATIAL] = [
    "tick_fraction",
    "living_friendly",
    "living_enemy_perceived",
    "score",
    "friendly_armor",
    "friendly_mech_infantry",
    "friendly_mortar",
    "friendly_aviation",
    "friendly_artillery",
    "friendly_anti_armor",
    "friendly_infantry",
    "ammo_fraction_mean",
    "damage_state_mean",
];

/// Layer stacks stored channel-major: `minimap[c * n * n + y * n + x]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialObservation {
    pub n: usize,
    pub minimap: Vec<f64>,
    pub screen: Vec<f64>,
    pub nonspatial: Vec<f64>,
}

impl SpatialObservation {
    pub fn minimap_at(&self, layer: usize, x: usize, y: usize) -> f64 {
        self.minimap[(layer * self.n + y) * self.n + x]
    }

    pub fn screen_at(&self, layer: usize, x: usize, y: usize) -> f64 {
        self.screen[(layer * self.n + y) * self.n + x]
    }
}

/// Strength normalizer for the strength-sum layers.
const STRENGTH_SCALE: f64 = 30.0;
const DENSITY_SCALE: f64 = 4.0;
const SCORE_SCALE: f64 = 10.0;

struct Layers {
    n: usize,
    sx: f64,
    sy: f64,
    data: Vec<f64>,
}

impl Layers {
    fn new(count: usize, n: usize, width: usize, height: usize) -> Self {
        Self { n, sx: n as f64 / width as f64, sy: n as f64 / height as f64, data: vec![0.0; count * n * n] }
    }

    fn bin(&self, p: Pos) -> (usize, usize) {
        let x = ((p.x * self.sx).floor() as isize).clamp(0, self.n as isize - 1) as usize;
        let y = ((p.y * self.sy).floor() as isize).clamp(0, self.n as isize - 1) as usize;
        (x, y)
    }

    fn add(&mut self, layer: usize, p: Pos, v: f64) {
        let (x, y) = self.bin(p);
        self.data[(layer * self.n + y) * self.n + x] += v;
    }

    fn set(&mut self, layer: usize, p: Pos, v: f64) {
        let (x, y) = self.bin(p);
        let slot = &mut self.data[(layer * self.n + y) * self.n + x];
        *slot = slot.max(v);
    }

    /// Fill by sampling every terrain cell; the bin takes the mean.
    fn terrain_mean(&mut self, layer: usize, view: &ForceView, pred: impl Fn(CellPos, Cell) -> bool) {
        let t = view.terrain();
        let n = self.n;
        let mut count = vec![0.0; n * n];
        let mut hits = vec![0.0; n * n];
        for y in 0..t.height() as i32 {
            for x in 0..t.width() as i32 {
                let c = CellPos::new(x, y);
                let (bx, by) = self.bin(c.center());
                count[by * n + bx] += 1.0;
                if pred(c, t.cell(c).expect("in bounds")) {
                    hits[by * n + bx] += 1.0;
                }
            }
        }
        for i in 0..n * n {
            self.data[layer * n * n + i] = ratio(hits[i], count[i]);
        }
    }

    fn finish(mut self) -> Vec<f64> {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
        self.data
    }
}

/// Static (per-terrain) minimap layers: passability, crossings, objectives.
fn static_layers(layers: &mut Layers, view: &ForceView, objectives: &[Region]) {
    layers.terrain_mean(2, view, |_, c| c.traversable());
    layers.terrain_mean(3, view, |_, c| c == Cell::Crossing);
    layers.terrain_mean(4, view, |c, _| objectives.iter().any(|r| r.contains(c.center())));
}

/// Encode the layer stacks for the view's force.
pub fn encode_spatial_obs(view: &ForceView, config: &SpatialConfig, objectives: &[Region]) -> SpatialObservation {
    let t = view.terrain();
    let (w, h, n) = (t.width(), t.height(), config.n);
    let mut mini = Layers::new(MINIMAP_LAYERS, n, w, h);
    let mut screen = Layers::new(SCREEN_LAYERS, n, w, h);
    static_layers(&mut mini, view, objectives);
    for u in view.friendly() {
        mini.set(0, u.position, 1.0);
        mini.add(5, u.position, u.strength as f64 / STRENGTH_SCALE);
        screen.set(u.class.index(), u.position, 1.0);
        if view.was_hit(u.id) {
            screen.set(9, u.position, 1.0);
        }
        if view.fired(u.id) {
            screen.set(10, u.position, 1.0);
        }
        screen.add(12, u.position, 1.0 / DENSITY_SCALE);
    }
    for e in view.enemies() {
        mini.set(1, e.position, 1.0);
        mini.add(6, e.position, e.strength as f64 / STRENGTH_SCALE);
        screen.set(7, e.position, 1.0);
        screen.add(8, e.position, e.strength as f64 / STRENGTH_SCALE);
        screen.add(12, e.position, 1.0 / DENSITY_SCALE);
    }
    screen.set(11, view.goal(), 1.0);

    let friends: Vec<_> = view.friendly().collect();
    let living = friends.len() as f64;
    let mut nonspatial = vec![0.0; NONSPATIAL];
    nonspatial[0] = ratio(view.tick() as f64, view.max_ticks as f64);
    nonspatial[1] = ratio(living, view.initial_friends as f64);
    nonspatial[2] = ratio(view.enemy_count() as f64, view.initial_enemies as f64);
    nonspatial[3] = 0.5 * ((view.score / SCORE_SCALE).tanh() + 1.0);
    for u in &friends {
        nonspatial[4 + u.class.index()] += 1.0 / view.initial_friends.max(1) as f64;
    }
    nonspatial[11] = ratio(friends.iter().map(|u| ratio(u.ammo as f64, u.ammo_max as f64)).sum(), living);
    nonspatial[12] =
        ratio(friends.iter().map(|u| ratio((u.strength_max - u.strength) as f64, u.strength_max as f64)).sum(), living);
    for v in &mut nonspatial {
        *v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    }
    SpatialObservation { n, minimap: mini.finish(), screen: screen.finish(), nonspatial }
}
