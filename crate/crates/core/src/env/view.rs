use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::sim::{
    distance_km, force_picture, CellPos, CombatEvent, DistanceField, EventKind, Force, Pos, TerrainGrid, Unit, UnitId,
    WorldState,
};

/// Lazily built shortest-path fields, one per target cell.
#[derive(Debug)]
pub struct RouteCache {
    terrain: Arc<TerrainGrid>,
    fields: Mutex<HashMap<CellPos, Arc<DistanceField>>>,
}

impl RouteCache {
    pub fn new(terrain: Arc<TerrainGrid>) -> Self {
        Self { terrain, fields: Mutex::new(HashMap::new()) }
    }

    pub fn terrain(&self) -> &Arc<TerrainGrid> {
        &self.terrain
    }

    pub fn field(&self, target: CellPos) -> Arc<DistanceField> {
        let mut fields = self.fields.lock().unwrap_or_else(|e| e.into_inner());
        fields.entry(target).or_insert_with(|| Arc::new(DistanceField::toward(&self.terrain, target))).clone()
    }

    /// Point to steer toward on a shortest route from `from` to `goal`;
    /// falls back to the goal itself when it is unreachable.
    pub fn waypoint(&self, from: Pos, goal: Pos) -> Pos {
        let cell = CellPos::of(goal);
        if !self.terrain.in_bounds_cell(cell) {
            return goal;
        }
        self.field(cell).next_waypoint(from, goal).unwrap_or(goal)
    }

    pub fn route_bearing(&self, from: Pos, goal: Pos) -> f64 {
        from.bearing_to(self.waypoint(from, goal))
    }
}

/// Everything one force is allowed to know at the start of a tick: its own
/// units, the enemies in its fused sensor picture (or every living enemy
/// when omniscient), terrain and the previous tick's ledger restricted to
/// its own units.
pub struct ForceView<'a> {
    world: &'a WorldState,
    force: Force,
    goal: Pos,
    enemies: Vec<UnitId>,
    omniscient: bool,
    routes: &'a RouteCache,
    pub initial_friends: usize,
    pub initial_enemies: usize,
    pub max_ticks: u64,
    pub score: f64,
}

impl<'a> ForceView<'a> {
    pub fn new(world: &'a WorldState, force: Force, goal: Pos, omniscient: bool, routes: &'a RouteCache) -> Self {
        let enemies = if omniscient {
            world.living_units(force.opponent()).map(|u| u.id).collect()
        } else {
            force_picture(world, force)
        };
        let initial_friends = world.units.iter().filter(|u| u.force == force).count();
        let initial_enemies = world.units.len() - initial_friends;
        Self {
            world,
            force,
            goal,
            enemies,
            omniscient,
            routes,
            initial_friends,
            initial_enemies,
            max_ticks: u64::MAX,
            score: 0.0,
        }
    }

    pub fn with_episode(mut self, max_ticks: u64, score: f64) -> Self {
        self.max_ticks = max_ticks;
        self.score = score;
        self
    }

    pub fn force(&self) -> Force {
        self.force
    }

    pub fn goal(&self) -> Pos {
        self.goal
    }

    pub fn tick(&self) -> u64 {
        self.world.tick
    }

    pub fn is_omniscient(&self) -> bool {
        self.omniscient
    }

    pub fn terrain(&self) -> &TerrainGrid {
        &self.world.terrain
    }

    pub fn routes(&self) -> &RouteCache {
        self.routes
    }

    pub fn cell_km(&self) -> f64 {
        self.world.cell_km()
    }

    pub fn max_step_cells(&self, kmh: f64) -> f64 {
        self.world.max_step_cells(kmh)
    }

    pub fn distance_km(&self, a: Pos, b: Pos) -> f64 {
        distance_km(self.world, a, b)
    }

    /// Own units, dead ones included, in id order.
    pub fn own_units(&self) -> impl Iterator<Item = &'a Unit> + '_ {
        let force = self.force;
        self.world.units.iter().filter(move |u| u.force == force)
    }

    pub fn friendly(&self) -> impl Iterator<Item = &'a Unit> + '_ {
        self.own_units().filter(|u| u.alive())
    }

    /// Perceived living enemies in id order.
    pub fn enemies(&self) -> impl Iterator<Item = &'a Unit> + '_ {
        let world = self.world;
        self.enemies.iter().map(move |id| &world.units[id.index()])
    }

    pub fn enemy_count(&self) -> usize {
        self.enemies.len()
    }

    /// A unit this force may know about: its own, or a perceived enemy.
    pub fn unit(&self, id: UnitId) -> Option<&'a Unit> {
        let u = self.world.unit(id)?;
        (u.force == self.force || self.enemies.contains(&id)).then_some(u)
    }

    pub fn perceives(&self, id: UnitId) -> bool {
        self.enemies.contains(&id)
    }

    pub fn nearest_enemy(&self, from: Pos) -> Option<&'a Unit> {
        self.enemies().min_by(|a, b| a.position.dist(from).total_cmp(&b.position.dist(from)).then(a.id.cmp(&b.id)))
    }

    /// Nearest perceived enemy within `unit`'s weapon range.
    pub fn nearest_enemy_in_range(&self, unit: &Unit) -> Option<&'a Unit> {
        self.enemies()
            .map(|e| (self.distance_km(unit.position, e.position), e))
            .filter(|(d, _)| *d <= unit.weapon_range)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.id.cmp(&b.1.id)))
            .map(|(_, e)| e)
    }

    /// Was `id` hit during the previous tick?
    pub fn was_hit(&self, id: UnitId) -> bool {
        self.world.events.iter().any(|e| e.kind == EventKind::Hit && e.actor == id)
    }

    pub fn fired(&self, id: UnitId) -> bool {
        self.world.events.iter().any(|e| e.kind == EventKind::Fired && e.actor == id)
    }

    /// Most recent shooter to hit `id`, if that shooter is perceived.
    pub fn last_attacker(&self, id: UnitId) -> Option<&'a Unit> {
        self.world
            .events
            .iter()
            .rev()
            .filter(|e| e.kind == EventKind::Hit && e.actor == id)
            .filter_map(|e| e.target_unit())
            .find_map(|a| self.perceives(a).then(|| &self.world.units[a.index()]))
    }

    /// Some friendly indirect unit with ammunition has `target` within range.
    pub fn indirect_support_on(&self, target: Pos) -> bool {
        self.friendly().any(|f| f.indirect && f.ammo > 0 && self.distance_km(f.position, target) <= f.weapon_range)
    }

    /// Unfiltered event ledger of the previous tick. Harness code must
    /// filter it before showing it to a fogged participant.
    pub fn last_events(&self) -> &'a [CombatEvent] {
        &self.world.events
    }

    /// Full-truth world access for omniscient controllers only.
    pub fn world(&self) -> Option<&'a WorldState> {
        self.omniscient.then_some(self.world)
    }
}
