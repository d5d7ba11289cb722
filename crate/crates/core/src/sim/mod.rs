//! Deterministic discrete-tick combat simulation.
//!
//! A tick runs six phases in a fixed order: speed/heading changes, movement,
//! indirect-fire impacts, sensing, direct fire, then ledger emission
//! (crossing triggers). All randomness flows through the world's own
//! [`SimRng`](crate::rng::SimRng) in phase order, so `(state, orders)`
//! fully determines the successor.

mod event;
mod terrain;
mod unit;
mod world;

pub use event::{CombatEvent, Diagnostic, EventKind, EventTarget};
pub use terrain::{Cell, CellPos, CellRect, DistanceField, Region, TerrainGrid, MIN_GRID_SIDE};
pub use unit::{Bank, ClassProfile, Force, Unit, UnitClass, UnitId};
pub use world::{
    advance_tick, call_for_fire, distance_km, force_picture, force_sees, move_unit, resolve_fire, visible_enemies,
    CombatRules, CrossingZones, FireMission, MoveOutcome, Order, OrderKind, WorldState,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid terrain: {0}")]
    InvalidTerrain(String),
    #[error("invalid unit {0}: {1}")]
    InvalidUnit(UnitId, String),
    #[error("malformed order for unit {unit}: {reason}")]
    MalformedOrder { unit: UnitId, reason: String },
}

/// Continuous position in cell units; `(0, 0)` is the corner of cell (0, 0).
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Pos {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Pos {
    fn from(v: [f64; 2]) -> Self {
        Self { x: v[0], y: v[1] }
    }
}

impl From<Pos> for [f64; 2] {
    fn from(p: Pos) -> Self {
        [p.x, p.y]
    }
}

impl Pos {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Euclidean distance in cell units.
    #[inline]
    pub fn dist(self, other: Pos) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    /// Bearing toward `other` in radians, normalized to `[0, 2π)`.
    pub fn bearing_to(self, other: Pos) -> f64 {
        normalize_angle((other.y - self.y).atan2(other.x - self.x))
    }

    pub fn offset(self, dx: f64, dy: f64) -> Pos {
        Pos::new(self.x + dx, self.y + dy)
    }
}

/// Wrap an angle into `[0, 2π)`.
pub fn normalize_angle(a: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let r = a.rem_euclid(tau);
    if r >= tau {
        0.0
    } else {
        r
    }
}
