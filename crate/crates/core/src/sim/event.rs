use serde::{Deserialize, Serialize};

use super::{CellPos, UnitId};

/// Reason attached to a non-failing diagnostic event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagnostic {
    UnknownUnit,
    DeadActor,
    DeadTarget,
    OutOfRange,
    NotVisible,
    NoAmmo,
    FriendlyTarget,
    NoFireSupport,
    OutOfFuel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "reason")]
pub enum EventKind {
    Fired,
    Hit,
    Damaged,
    Destroyed,
    Crossed,
    Retreated,
    FireMissionCalled,
    FireMissionImpact,
    MoveBlocked,
    Diagnostic(Diagnostic),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventTarget {
    Unit(UnitId),
    Cell(CellPos),
}

/// One entry of the per-tick combat ledger.
///
/// `actor` is the subject of the event: the shooter for `Fired`, the victim
/// for `Hit`/`Damaged`/`Destroyed`, the requester for `FireMissionCalled`
/// and the servicing indirect unit for `FireMissionImpact`. For victim
/// events `target` names the shooter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CombatEvent {
    #[serde(flatten)]
    pub kind: EventKind,
    pub actor: UnitId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<EventTarget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amount: Option<u32>,
    pub tick: u64,
}

impl CombatEvent {
    pub fn new(kind: EventKind, actor: UnitId, tick: u64) -> Self {
        Self { kind, actor, target: None, amount: None, tick }
    }

    pub fn with_unit(mut self, target: UnitId) -> Self {
        self.target = Some(EventTarget::Unit(target));
        self
    }

    pub fn with_cell(mut self, cell: CellPos) -> Self {
        self.target = Some(EventTarget::Cell(cell));
        self
    }

    pub fn with_amount(mut self, amount: u32) -> Self {
        self.amount = Some(amount);
        self
    }

    pub fn target_unit(&self) -> Option<UnitId> {
        match self.target {
            Some(EventTarget::Unit(u)) => Some(u),
            _ => None,
        }
    }

    pub fn is_diagnostic(&self) -> bool {
        matches!(self.kind, EventKind::Diagnostic(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape_is_flat_and_round_trips() {
        let fired = CombatEvent::new(EventKind::Fired, UnitId(1), 14).with_unit(UnitId(4)).with_amount(2);
        let text = serde_json::to_string(&fired).unwrap();
        assert_eq!(text, r#"{"kind":"fired","actor":1,"target":{"unit":4},"amount":2,"tick":14}"#);
        let diag = CombatEvent::new(EventKind::Diagnostic(Diagnostic::NoAmmo), UnitId(0), 3);
        let text = serde_json::to_string(&diag).unwrap();
        assert_eq!(text, r#"{"kind":"diagnostic","reason":"no_ammo","actor":0,"tick":3}"#);
        for e in [fired, diag, CombatEvent::new(EventKind::Crossed, UnitId(2), 9).with_cell(CellPos::new(3, 4))] {
            assert_eq!(serde_json::from_str::<CombatEvent>(&serde_json::to_string(&e).unwrap()).unwrap(), e);
        }
    }
}
