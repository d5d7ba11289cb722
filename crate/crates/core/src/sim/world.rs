use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    Bank, CellPos, CombatEvent, Diagnostic, EventKind, Force, Pos, Region, SimError, TerrainGrid, Unit, UnitId,
};
use crate::hash::StableHasher;
use crate::rng::SimRng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombatRules {
    /// Bernoulli hit model with linear range falloff instead of fixed damage.
    pub stochastic: bool,
    pub accuracy: f64,
    /// Ticks between a call for fire and its impact.
    pub mission_delay: u64,
    /// Impact radius around the target cell center, in cells.
    pub mission_radius: f64,
}

impl Default for CombatRules {
    fn default() -> Self {
        Self { stochastic: false, accuracy: 0.8, mission_delay: 3, mission_radius: 1.0 }
    }
}

/// The region pair whose transitions fire the crossing/retreat triggers.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossingZones {
    pub near: Region,
    pub far: Region,
}

impl CrossingZones {
    fn bank_of(&self, p: Pos) -> Option<Bank> {
        if self.far.contains(p) {
            Some(Bank::Far)
        } else if self.near.contains(p) {
            Some(Bank::Near)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FireMission {
    pub target: CellPos,
    pub arrival_tick: u64,
    pub damage: u32,
    pub requester: UnitId,
    pub shooter: UnitId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "order")]
pub enum OrderKind {
    SetSpeed {
        kmh: f64,
    },
    SetHeading {
        radians: f64,
    },
    /// Displacement in cells; clamped to what the unit's speed allows.
    Move {
        dx: f64,
        dy: f64,
    },
    Fire {
        target: UnitId,
    },
    CallForFire {
        cell: CellPos,
    },
    /// Suppress automatic engagement for this tick.
    HoldFire,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub unit: UnitId,
    #[serde(flatten)]
    pub kind: OrderKind,
}

impl Order {
    pub fn new(unit: UnitId, kind: OrderKind) -> Self {
        Self { unit, kind }
    }

    fn validate(&self, world: &WorldState) -> Result<(), SimError> {
        let bad = |reason: &str| Err(SimError::MalformedOrder { unit: self.unit, reason: reason.to_string() });
        match self.kind {
            OrderKind::SetSpeed { kmh } if !kmh.is_finite() || kmh < 0.0 => bad("speed must be finite and >= 0"),
            OrderKind::SetHeading { radians } if !radians.is_finite() => bad("heading must be finite"),
            OrderKind::Move { dx, dy } if !dx.is_finite() || !dy.is_finite() => bad("displacement must be finite"),
            OrderKind::CallForFire { cell } if !world.terrain.in_bounds_cell(cell) => {
                bad("fire mission cell out of bounds")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub tick: u64,
    pub tick_seconds: f64,
    /// Indexed by `UnitId`; ids are dense and assigned in roster order.
    pub units: Vec<Unit>,
    pub terrain: Arc<TerrainGrid>,
    pub rng: SimRng,
    /// Ledger of the most recently completed tick.
    pub events: Vec<CombatEvent>,
    pub pending_fire_missions: Vec<FireMission>,
    pub rules: CombatRules,
    pub crossing: Option<Arc<CrossingZones>>,
}

impl WorldState {
    pub fn new(
        terrain: Arc<TerrainGrid>,
        tick_seconds: f64,
        mut units: Vec<Unit>,
        rng: SimRng,
        rules: CombatRules,
        crossing: Option<Arc<CrossingZones>>,
    ) -> Result<Self, SimError> {
        for (i, u) in units.iter_mut().enumerate() {
            if u.id.index() != i {
                return Err(SimError::InvalidUnit(u.id, format!("id must equal roster index {i}")));
            }
            if !terrain.traversable(u.position) {
                return Err(SimError::InvalidUnit(u.id, format!("spawn {:?} is not traversable", u.position)));
            }
            if u.strength > u.strength_max || u.ammo > u.ammo_max || u.speed > u.speed_max || u.speed < 0.0 {
                return Err(SimError::InvalidUnit(u.id, "attribute outside its bounds".into()));
            }
            if u.force == Force::Blue {
                u.bank = crossing.as_ref().and_then(|z| z.bank_of(u.position));
            }
        }
        Ok(Self {
            tick: 0,
            tick_seconds,
            units,
            terrain,
            rng,
            events: Vec::new(),
            pending_fire_missions: Vec::new(),
            rules,
            crossing,
        })
    }

    pub fn unit(&self, id: UnitId) -> Option<&Unit> {
        self.units.get(id.index())
    }

    fn living(&self, id: UnitId) -> Option<&Unit> {
        self.unit(id).filter(|u| u.alive())
    }

    pub fn living_units(&self, force: Force) -> impl Iterator<Item = &Unit> + '_ {
        self.units.iter().filter(move |u| u.force == force && u.alive())
    }

    pub fn cell_km(&self) -> f64 {
        self.terrain.cell_km()
    }

    /// Furthest a unit moving at `kmh` may travel in one tick, in cells.
    pub fn max_step_cells(&self, kmh: f64) -> f64 {
        kmh * self.tick_seconds / 3600.0 / self.cell_km()
    }

    /// 64-bit stable digest over tick, unit tuples (reals rounded to 1e-6),
    /// pending missions and rng state.
    pub fn state_hash(&self) -> u64 {
        let mut h = StableHasher::new();
        h.write_u64(self.tick);
        for u in &self.units {
            h.write_u32(u.id.0);
            h.write_u8(u.force as u8);
            h.write_u8(u.class as u8);
            h.write_rounded(u.position.x);
            h.write_rounded(u.position.y);
            h.write_rounded(u.heading);
            h.write_rounded(u.speed);
            h.write_u32(u.strength);
            h.write_u32(u.ammo);
            h.write_rounded(u.fuel_consumed);
            h.write_u8(match u.bank {
                None => 0,
                Some(Bank::Near) => 1,
                Some(Bank::Far) => 2,
            });
        }
        for m in &self.pending_fire_missions {
            h.write_u64(m.arrival_tick);
            h.write_i64(m.target.x as i64);
            h.write_i64(m.target.y as i64);
            h.write_u32(m.damage);
        }
        h.write_u64(self.rng.state());
        h.finish()
    }

    fn apply_damage(&mut self, victim: UnitId, source: UnitId, damage: u32, events: &mut Vec<CombatEvent>) {
        let tick = self.tick;
        let unit = &mut self.units[victim.index()];
        let applied = damage.min(unit.strength);
        if applied == 0 {
            return;
        }
        unit.strength -= applied;
        events.push(CombatEvent::new(EventKind::Damaged, victim, tick).with_unit(source).with_amount(applied));
        if unit.strength == 0 {
            unit.speed = 0.0;
            events.push(CombatEvent::new(EventKind::Destroyed, victim, tick).with_unit(source));
        }
    }
}

/// Euclidean distance between two positions, in kilometers.
pub fn distance_km(world: &WorldState, a: Pos, b: Pos) -> f64 {
    a.dist(b) * world.cell_km()
}

/// Living enemies within the unit's sensor range (inclusive). Empty for a
/// dead or unknown unit.
pub fn visible_enemies(world: &WorldState, unit: UnitId) -> Vec<UnitId> {
    let Some(u) = world.living(unit) else {
        return Vec::new();
    };
    world
        .living_units(u.force.opponent())
        .filter(|e| distance_km(world, u.position, e.position) <= u.sensor_range)
        .map(|e| e.id)
        .collect()
}

/// Does any living unit of `force` currently sense `target`?
pub fn force_sees(world: &WorldState, force: Force, target: UnitId) -> bool {
    let Some(t) = world.living(target) else {
        return false;
    };
    t.force != force && world.living_units(force).any(|u| distance_km(world, u.position, t.position) <= u.sensor_range)
}

/// The force's fused picture: union of every living unit's visible enemies,
/// sorted by id.
pub fn force_picture(world: &WorldState, force: Force) -> Vec<UnitId> {
    world.living_units(force.opponent()).filter(|e| force_sees(world, force, e.id)).map(|e| e.id).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum MoveOutcome {
    Moved(Pos),
    Blocked(CombatEvent),
}

/// Displace a living unit by `(dx, dy)` cells. The straight segment is
/// sampled at ≤ 0.5-cell intervals; any out-of-bounds or impassable sample
/// blocks the whole move.
pub fn move_unit(world: &mut WorldState, unit: UnitId, dx: f64, dy: f64) -> MoveOutcome {
    let tick = world.tick;
    let Some(u) = world.living(unit) else {
        return MoveOutcome::Blocked(CombatEvent::new(EventKind::Diagnostic(Diagnostic::DeadActor), unit, tick));
    };
    if u.out_of_fuel() {
        return MoveOutcome::Blocked(CombatEvent::new(EventKind::Diagnostic(Diagnostic::OutOfFuel), unit, tick));
    }
    let from = u.position;
    let to = from.offset(dx, dy);
    if !world.terrain.segment_clear(from, to) {
        return MoveOutcome::Blocked(CombatEvent::new(EventKind::MoveBlocked, unit, tick));
    }
    let km = from.dist(to) * world.cell_km();
    let u = &mut world.units[unit.index()];
    u.position = to;
    u.fuel_consumed = (u.fuel_consumed + km * u.fuel_rate).min(u.fuel_capacity);
    MoveOutcome::Moved(to)
}

/// One fire action of `attacker` at `target`.
pub fn resolve_fire(world: &mut WorldState, attacker: UnitId, target: UnitId) -> Vec<CombatEvent> {
    let tick = world.tick;
    let diag = |d: Diagnostic| vec![CombatEvent::new(EventKind::Diagnostic(d), attacker, tick).with_unit(target)];
    let Some(a) = world.unit(attacker) else {
        return diag(Diagnostic::UnknownUnit);
    };
    if !a.alive() {
        return diag(Diagnostic::DeadActor);
    }
    let Some(t) = world.living(target) else {
        return diag(Diagnostic::DeadTarget);
    };
    if t.force == a.force {
        return diag(Diagnostic::FriendlyTarget);
    }
    if a.ammo == 0 {
        return diag(Diagnostic::NoAmmo);
    }
    let d = distance_km(world, a.position, t.position);
    if d > a.weapon_range {
        return diag(Diagnostic::OutOfRange);
    }
    if !a.indirect && !force_sees(world, a.force, target) {
        return diag(Diagnostic::NotVisible);
    }

    let (shots, weapon_damage, weapon_range) = (a.shots_per_tick.min(a.ammo), a.weapon_damage, a.weapon_range);
    world.units[attacker.index()].ammo -= shots;
    let hits = if world.rules.stochastic {
        let p = world.rules.accuracy * (1.0 - 0.5 * d / weapon_range);
        (0..shots).filter(|_| world.rng.bernoulli(p)).count() as u32
    } else {
        shots
    };

    let mut events = vec![CombatEvent::new(EventKind::Fired, attacker, tick).with_unit(target).with_amount(shots)];
    if hits > 0 {
        events.push(CombatEvent::new(EventKind::Hit, target, tick).with_unit(attacker).with_amount(hits));
        world.apply_damage(target, attacker, hits * weapon_damage, &mut events);
    }
    events
}

/// Request indirect fire on `cell`, serviced by the nearest friendly
/// indirect unit that has ammunition and the cell within range.
pub fn call_for_fire(world: &mut WorldState, requester: UnitId, cell: CellPos) -> Vec<CombatEvent> {
    let tick = world.tick;
    let Some(r) = world.living(requester) else {
        return vec![CombatEvent::new(EventKind::Diagnostic(Diagnostic::DeadActor), requester, tick)];
    };
    let (force, from) = (r.force, r.position);
    let aim = cell.center();
    let shooter = world
        .living_units(force)
        .filter(|u| u.indirect && u.ammo > 0 && distance_km(world, u.position, aim) <= u.weapon_range)
        .min_by(|a, b| {
            let da = a.position.dist(from);
            let db = b.position.dist(from);
            da.total_cmp(&db).then(a.id.cmp(&b.id))
        })
        .map(|u| u.id);
    let Some(shooter) = shooter else {
        return vec![
            CombatEvent::new(EventKind::Diagnostic(Diagnostic::NoFireSupport), requester, tick).with_cell(cell)
        ];
    };
    let s = &world.units[shooter.index()];
    let (shots, weapon_damage) = (s.shots_per_tick.min(s.ammo), s.weapon_damage);
    world.units[shooter.index()].ammo -= shots;
    let hits = if world.rules.stochastic {
        let p = world.rules.accuracy;
        (0..shots).filter(|_| world.rng.bernoulli(p)).count() as u32
    } else {
        shots
    };
    let damage = hits * weapon_damage;
    world.pending_fire_missions.push(FireMission {
        target: cell,
        arrival_tick: tick + world.rules.mission_delay,
        damage,
        requester,
        shooter,
    });
    vec![CombatEvent::new(EventKind::FireMissionCalled, requester, tick).with_cell(cell).with_amount(damage)]
}

#[derive(Default)]
struct TickPlan {
    moves: Vec<Option<(f64, f64)>>,
    fires: Vec<Option<UnitId>>,
    hold_fire: Vec<bool>,
    calls: Vec<(UnitId, CellPos)>,
}

/// Advance the world by one tick. Malformed orders reject the whole call
/// before any mutation; orders for dead or unknown units are ignored with a
/// diagnostic event.
pub fn advance_tick(world: &mut WorldState, orders: &[Order]) -> Result<Vec<CombatEvent>, SimError> {
    for o in orders {
        o.validate(world)?;
    }
    let tick = world.tick;
    let n = world.units.len();
    let mut events = Vec::new();
    let mut plan =
        TickPlan { moves: vec![None; n], fires: vec![None; n], hold_fire: vec![false; n], calls: Vec::new() };

    // (1) speed / heading
    for o in orders {
        let Some(u) = world.units.get_mut(o.unit.index()) else {
            events.push(CombatEvent::new(EventKind::Diagnostic(Diagnostic::UnknownUnit), o.unit, tick));
            continue;
        };
        if !u.alive() {
            events.push(CombatEvent::new(EventKind::Diagnostic(Diagnostic::DeadActor), o.unit, tick));
            continue;
        }
        let i = o.unit.index();
        match o.kind {
            OrderKind::SetSpeed { kmh } => u.speed = kmh.min(u.speed_max),
            OrderKind::SetHeading { radians } => u.heading = super::normalize_angle(radians),
            OrderKind::Move { dx, dy } => plan.moves[i] = Some((dx, dy)),
            OrderKind::Fire { target } => plan.fires[i] = Some(target),
            OrderKind::CallForFire { cell } => plan.calls.push((o.unit, cell)),
            OrderKind::HoldFire => plan.hold_fire[i] = true,
        }
    }

    // (2) movement
    for i in 0..n {
        let Some((mut dx, mut dy)) = plan.moves[i] else { continue };
        let limit = world.max_step_cells(world.units[i].speed);
        let len = dx.hypot(dy);
        if len <= 0.0 || limit <= 0.0 {
            continue;
        }
        if len > limit {
            dx *= limit / len;
            dy *= limit / len;
        }
        if let MoveOutcome::Blocked(e) = move_unit(world, UnitId(i as u32), dx, dy) {
            events.push(e);
        }
    }

    // (3) indirect-fire impacts
    let (due, pending): (Vec<_>, Vec<_>) =
        std::mem::take(&mut world.pending_fire_missions).into_iter().partition(|m| m.arrival_tick <= tick);
    world.pending_fire_missions = pending;
    for m in due {
        events.push(
            CombatEvent::new(EventKind::FireMissionImpact, m.shooter, tick).with_cell(m.target).with_amount(m.damage),
        );
        let center = m.target.center();
        let radius = world.rules.mission_radius;
        let victims: Vec<UnitId> =
            world.units.iter().filter(|u| u.alive() && u.position.dist(center) <= radius).map(|u| u.id).collect();
        for v in victims {
            if m.damage > 0 {
                events.push(CombatEvent::new(EventKind::Hit, v, tick).with_unit(m.shooter).with_amount(1));
                world.apply_damage(v, m.shooter, m.damage, &mut events);
            }
        }
    }

    // (4) sensing
    let pictures = [force_picture(world, Force::Blue), force_picture(world, Force::Red)];

    // (5) calls for fire, then direct fire in attacker-id order
    for (requester, cell) in plan.calls {
        events.extend(call_for_fire(world, requester, cell));
    }
    for i in 0..n {
        let a = &world.units[i];
        if !a.alive() {
            if plan.fires[i].is_some() {
                events.push(CombatEvent::new(EventKind::Diagnostic(Diagnostic::DeadActor), a.id, tick));
            }
            continue;
        }
        let target = match plan.fires[i] {
            Some(t) => Some(t),
            None if !a.passive && !plan.hold_fire[i] && a.ammo > 0 => {
                nearest_in_range(world, a, &pictures[a.force.index()])
            }
            None => None,
        };
        if let Some(t) = target {
            events.extend(resolve_fire(world, UnitId(i as u32), t));
        }
    }

    // (6) region triggers and ledger
    if let Some(zones) = world.crossing.clone() {
        for u in world.units.iter_mut().filter(|u| u.force == Force::Blue && u.alive()) {
            let Some(now) = zones.bank_of(u.position) else { continue };
            match (u.bank, now) {
                (Some(Bank::Near), Bank::Far) => events.push(CombatEvent::new(EventKind::Crossed, u.id, tick)),
                (Some(Bank::Far), Bank::Near) => events.push(CombatEvent::new(EventKind::Retreated, u.id, tick)),
                _ => {}
            }
            u.bank = Some(now);
        }
    }

    world.tick += 1;
    world.events = events.clone();
    Ok(events)
}

fn nearest_in_range(world: &WorldState, a: &Unit, picture: &[UnitId]) -> Option<UnitId> {
    picture
        .iter()
        .filter_map(|&id| world.living(id))
        .map(|e| (distance_km(world, a.position, e.position), e.id))
        .filter(|(d, _)| *d <= a.weapon_range)
        .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
        .map(|(_, id)| id)
}
