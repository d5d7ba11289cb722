use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Commander;
use crate::env::{ActionSet, ForceView};
use crate::rng::SimRng;
use crate::sim::{Order, OrderKind, Pos, TerrainGrid, Unit, UnitId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Posture {
    HoldFire,
    ReturnFire,
    FreeFire,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub at: Pos,
    /// The group may not head for this waypoint before this tick.
    pub tick: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoaGroup {
    /// Indices into the force's units in id order.
    pub members: Vec<usize>,
    pub waypoints: Vec<Waypoint>,
    pub posture: Posture,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoaScript {
    pub groups: Vec<CoaGroup>,
}

/// A unit counts as arrived within this many cells of its waypoint.
pub const ARRIVAL_RADIUS: f64 = 1.0;

impl CoaScript {
    pub fn validate(&self, terrain: Option<&TerrainGrid>, force_size: usize) -> Result<(), String> {
        for (g, group) in self.groups.iter().enumerate() {
            if let Some(&m) = group.members.iter().find(|&&m| m >= force_size) {
                return Err(format!("group {g}: member {m} beyond force size {force_size}"));
            }
            if group.waypoints.windows(2).any(|w| w[1].tick < w[0].tick) {
                return Err(format!("group {g}: waypoint ticks decrease"));
            }
            if let Some(t) = terrain {
                if let Some(i) = group.waypoints.iter().position(|w| !t.traversable(w.at)) {
                    return Err(format!("group {g}: waypoint {i} not on a traversable cell"));
                }
            }
        }
        Ok(())
    }
}

fn posture_orders(view: &ForceView, u: &Unit, posture: Posture) -> Vec<Order> {
    match posture {
        Posture::HoldFire => vec![Order::new(u.id, OrderKind::HoldFire)],
        Posture::ReturnFire => match view.last_attacker(u.id) {
            Some(a) if view.distance_km(u.position, a.position) <= u.weapon_range => {
                vec![Order::new(u.id, OrderKind::Fire { target: a.id })]
            }
            _ => vec![Order::new(u.id, OrderKind::HoldFire)],
        },
        Posture::FreeFire => view
            .nearest_enemy_in_range(u)
            .map(|e| vec![Order::new(u.id, OrderKind::Fire { target: e.id })])
            .unwrap_or_default(),
    }
}

/// Orders for one tick of a scripted course of action. `cursors` holds each
/// unit's current waypoint index and advances whenever the unit is within
/// `ARRIVAL_RADIUS` cells of it.
pub fn scripted_coa_step(script: &CoaScript, cursors: &mut BTreeMap<UnitId, usize>, view: &ForceView) -> Vec<Order> {
    let own: Vec<&Unit> = view.own_units().collect();
    let tick = view.tick();
    let mut orders = Vec::new();
    for group in &script.groups {
        for &m in &group.members {
            let Some(u) = own.get(m).copied().filter(|u| u.alive()) else { continue };
            let k = cursors.entry(u.id).or_insert(0);
            while *k < group.waypoints.len() && u.position.dist(group.waypoints[*k].at) <= ARRIVAL_RADIUS {
                *k += 1;
            }
            match group.waypoints.get(*k).filter(|w| w.tick <= tick) {
                Some(w) => {
                    let via = view.routes().waypoint(u.position, w.at);
                    let bearing = u.position.bearing_to(via);
                    let len = view.max_step_cells(u.speed_max).min(u.position.dist(w.at));
                    orders.push(Order::new(u.id, OrderKind::SetSpeed { kmh: u.speed_max }));
                    orders.push(Order::new(u.id, OrderKind::SetHeading { radians: bearing }));
                    orders.push(Order::new(u.id, OrderKind::Move { dx: len * bearing.cos(), dy: len * bearing.sin() }));
                }
                None => orders.push(Order::new(u.id, OrderKind::SetSpeed { kmh: 0.0 })),
            }
            orders.extend(posture_orders(view, u, group.posture));
        }
    }
    orders
}

#[derive(Clone, Debug)]
pub struct ScriptedCommander {
    script: CoaScript,
    cursors: BTreeMap<UnitId, usize>,
}

impl ScriptedCommander {
    pub fn new(script: CoaScript) -> Self {
        Self { script, cursors: BTreeMap::new() }
    }

    pub fn cursor(&self, unit: UnitId) -> usize {
        self.cursors.get(&unit).copied().unwrap_or(0)
    }
}

impl Commander for ScriptedCommander {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn act(&mut self, view: &ForceView, _rng: &mut SimRng) -> ActionSet {
        ActionSet::Orders(scripted_coa_step(&self.script, &mut self.cursors, view))
    }

    fn reset(&mut self) {
        self.cursors.clear();
    }
}
