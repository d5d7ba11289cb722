use serde::{Deserialize, Serialize};

use super::view::ForceView;
use crate::sim::{CellPos, Order, OrderKind, Pos, Unit, UnitId};

/// Per-unit discrete command, in the canonical order of the action space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscreteAction {
    NoOp,
    MoveForward,
    MoveBackward,
    MoveRight,
    MoveLeft,
    SpeedUp,
    SlowDown,
    OrientToGoal,
    Halt,
    FireWeapon,
    CallForFire,
    ReactToContact,
}

impl DiscreteAction {
    pub const COUNT: usize = 12;
    pub const ALL: [DiscreteAction; 12] = [
        DiscreteAction::NoOp,
        DiscreteAction::MoveForward,
        DiscreteAction::MoveBackward,
        DiscreteAction::MoveRight,
        DiscreteAction::MoveLeft,
        DiscreteAction::SpeedUp,
        DiscreteAction::SlowDown,
        DiscreteAction::OrientToGoal,
        DiscreteAction::Halt,
        DiscreteAction::FireWeapon,
        DiscreteAction::CallForFire,
        DiscreteAction::ReactToContact,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            DiscreteAction::NoOp => "no_op",
            DiscreteAction::MoveForward => "move_forward",
            DiscreteAction::MoveBackward => "move_backward",
            DiscreteAction::MoveRight => "move_right",
            DiscreteAction::MoveLeft => "move_left",
            DiscreteAction::SpeedUp => "speed_up",
            DiscreteAction::SlowDown => "slow_down",
            DiscreteAction::OrientToGoal => "orient_to_goal",
            DiscreteAction::Halt => "halt",
            DiscreteAction::FireWeapon => "fire_weapon",
            DiscreteAction::CallForFire => "call_for_fire",
            DiscreteAction::ReactToContact => "react_to_contact",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompoundId {
    NoOp,
    Move,
    Attack,
}

impl CompoundId {
    pub const COUNT: usize = 3;
    pub const ALL: [CompoundId; 3] = [CompoundId::NoOp, CompoundId::Move, CompoundId::Attack];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Action id with a spatial argument; `x`, `y` are map fractions in [0, 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompoundAction {
    pub id: CompoundId,
    pub x: f64,
    pub y: f64,
}

impl CompoundAction {
    pub fn new(id: CompoundId, x: f64, y: f64) -> Self {
        Self { id, x, y }
    }

    /// From categorical bin choices over `n` bins per axis.
    pub fn from_bins(id: CompoundId, xb: usize, yb: usize, n: usize) -> Self {
        Self { id, x: (xb as f64 + 0.5) / n as f64, y: (yb as f64 + 0.5) / n as f64 }
    }

    /// Compound action aimed at a map position.
    pub fn at(id: CompoundId, p: Pos, width: usize, height: usize) -> Self {
        Self { id, x: p.x / width as f64, y: p.y / height as f64 }
    }

    pub fn point(&self, width: usize, height: usize) -> Pos {
        let fx = self.x.clamp(0.0, 1.0 - 1e-9);
        let fy = self.y.clamp(0.0, 1.0 - 1e-9);
        Pos::new(fx * width as f64, fy * height as f64)
    }
}

/// Commands for one force for one tick. Units without an entry idle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "actions")]
pub enum ActionSet {
    Discrete(Vec<(UnitId, DiscreteAction)>),
    Compound(Vec<(UnitId, CompoundAction)>),
    /// Raw simulator orders, used by scripted courses of action.
    Orders(Vec<Order>),
}

impl ActionSet {
    pub fn empty() -> Self {
        ActionSet::Discrete(Vec::new())
    }

    /// Units named by the set, in order of appearance.
    pub fn units(&self) -> Vec<UnitId> {
        match self {
            ActionSet::Discrete(v) => v.iter().map(|(u, _)| *u).collect(),
            ActionSet::Compound(v) => v.iter().map(|(u, _)| *u).collect(),
            ActionSet::Orders(v) => v.iter().map(|o| o.unit).collect(),
        }
    }

    /// One compound action applied to every living friendly unit.
    pub fn broadcast(view: &ForceView, action: CompoundAction) -> Self {
        ActionSet::Compound(view.friendly().map(|u| (u.id, action)).collect())
    }
}

/// Fraction of `speed_max` added or removed by SpeedUp / SlowDown.
pub const SPEED_STEP: f64 = 0.2;

fn step_along(view: &ForceView, u: &Unit, bearing: f64) -> OrderKind {
    let len = view.max_step_cells(u.speed);
    OrderKind::Move { dx: len * bearing.cos(), dy: len * bearing.sin() }
}

/// Translate one unit's discrete action into simulator orders.
pub fn decode_discrete(view: &ForceView, u: &Unit, action: DiscreteAction) -> Vec<Order> {
    use DiscreteAction::*;
    let order = |k: OrderKind| Order::new(u.id, k);
    let h = u.heading;
    match action {
        NoOp => vec![],
        MoveForward => vec![order(step_along(view, u, h))],
        MoveBackward => vec![order(step_along(view, u, h + std::f64::consts::PI))],
        MoveRight => vec![order(step_along(view, u, h - std::f64::consts::FRAC_PI_2))],
        MoveLeft => vec![order(step_along(view, u, h + std::f64::consts::FRAC_PI_2))],
        SpeedUp => vec![order(OrderKind::SetSpeed { kmh: (u.speed + SPEED_STEP * u.speed_max).min(u.speed_max) })],
        SlowDown => vec![order(OrderKind::SetSpeed { kmh: (u.speed - SPEED_STEP * u.speed_max).max(0.0) })],
        OrientToGoal => {
            vec![order(OrderKind::SetHeading { radians: view.routes().route_bearing(u.position, view.goal()) })]
        }
        Halt => vec![order(OrderKind::SetSpeed { kmh: 0.0 })],
        FireWeapon => view
            .nearest_enemy_in_range(u)
            .or_else(|| view.nearest_enemy(u.position))
            .map(|e| vec![order(OrderKind::Fire { target: e.id })])
            .unwrap_or_default(),
        CallForFire => view
            .nearest_enemy(u.position)
            .map(|e| vec![order(OrderKind::CallForFire { cell: CellPos::of(e.position) })])
            .unwrap_or_default(),
        ReactToContact => {
            if !view.was_hit(u.id) {
                return vec![];
            }
            let Some(a) = view.last_attacker(u.id) else { return vec![] };
            let mut out = vec![order(OrderKind::SetHeading { radians: u.position.bearing_to(a.position) })];
            if view.distance_km(u.position, a.position) <= u.weapon_range {
                out.push(order(OrderKind::Fire { target: a.id }));
            }
            out
        }
    }
}

/// Translate one unit's compound action into simulator orders. Move follows
/// a shortest route toward the point; Attack fires on the perceived enemy in
/// range nearest the point, otherwise moves toward it.
pub fn decode_compound(view: &ForceView, u: &Unit, action: CompoundAction) -> Vec<Order> {
    let t = view.terrain();
    let target = action.point(t.width(), t.height());
    let mv = || {
        let w = view.routes().waypoint(u.position, target);
        let bearing = u.position.bearing_to(w);
        let len = view.max_step_cells(u.speed).min(u.position.dist(target));
        vec![
            Order::new(u.id, OrderKind::SetHeading { radians: bearing }),
            Order::new(u.id, OrderKind::Move { dx: len * bearing.cos(), dy: len * bearing.sin() }),
        ]
    };
    match action.id {
        CompoundId::NoOp => vec![],
        CompoundId::Move => mv(),
        CompoundId::Attack => {
            let pick = view
                .enemies()
                .filter(|e| view.distance_km(u.position, e.position) <= u.weapon_range)
                .min_by(|a, b| a.position.dist(target).total_cmp(&b.position.dist(target)).then(a.id.cmp(&b.id)));
            match pick {
                Some(e) => vec![Order::new(u.id, OrderKind::Fire { target: e.id })],
                None => mv(),
            }
        }
    }
}
