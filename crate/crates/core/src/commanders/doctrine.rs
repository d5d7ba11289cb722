use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::Commander;
use crate::env::{encode_vector_obs, feature_index, ActionSet, DiscreteAction, ForceView, VECTOR_FEATURES};
use crate::rng::SimRng;
use crate::sim::Unit;

/// Predicate over one unit's fog-filtered situation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "when")]
pub enum Condition {
    Always,
    TakingFire,
    EnemyPerceived,
    EnemyInRange,
    /// `damage_state` strictly above the threshold.
    DamageAbove {
        threshold: f64,
    },
    /// A friendly indirect unit can reach the nearest perceived enemy.
    FireSupport,
    EvenTick,
    All {
        of: Vec<Condition>,
    },
    Not {
        of: Box<Condition>,
    },
}

struct Situation<'a> {
    view: &'a ForceView<'a>,
    unit: &'a Unit,
    features: [f64; VECTOR_FEATURES],
}

impl Condition {
    fn holds(&self, s: &Situation) -> bool {
        let f = |name: &str| s.features[feature_index(name).expect("known feature")];
        match self {
            Condition::Always => true,
            Condition::TakingFire => f("taking_fire") > 0.5,
            Condition::EnemyPerceived => s.view.enemy_count() > 0,
            Condition::EnemyInRange => s.view.nearest_enemy_in_range(s.unit).is_some(),
            Condition::DamageAbove { threshold } => f("damage_state") > *threshold,
            Condition::FireSupport => f("fire_support") > 0.5,
            Condition::EvenTick => s.view.tick().is_multiple_of(2),
            Condition::All { of } => of.iter().all(|c| c.holds(s)),
            Condition::Not { of } => !of.holds(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoctrineRule {
    /// Lower fires first; unique within a rule set.
    pub priority: i32,
    pub condition: Condition,
    pub action: DiscreteAction,
}

impl DoctrineRule {
    pub fn new(priority: i32, condition: Condition, action: DiscreteAction) -> Self {
        Self { priority, condition, action }
    }
}

pub fn validate_rules(rules: &[DoctrineRule]) -> Result<(), String> {
    let mut seen = HashSet::new();
    for r in rules {
        if !seen.insert(r.priority) {
            return Err(format!("duplicate priority {}", r.priority));
        }
        if let Condition::DamageAbove { threshold } = r.condition {
            if !threshold.is_finite() {
                return Err(format!("rule {}: non-finite threshold", r.priority));
            }
        }
    }
    Ok(())
}

/// The stand-in doctrine: return fire, react to contact, engage, fall back
/// when badly damaged, call for fire, otherwise advance on the goal.
pub fn default_rules() -> Vec<DoctrineRule> {
    use Condition::*;
    use DiscreteAction as A;
    vec![
        DoctrineRule::new(1, All { of: vec![TakingFire, EnemyInRange] }, A::FireWeapon),
        DoctrineRule::new(2, All { of: vec![TakingFire, Not { of: Box::new(EnemyInRange) }] }, A::ReactToContact),
        DoctrineRule::new(3, EnemyInRange, A::FireWeapon),
        DoctrineRule::new(4, DamageAbove { threshold: 0.7 }, A::MoveBackward),
        DoctrineRule::new(5, All { of: vec![FireSupport, EnemyPerceived] }, A::CallForFire),
        DoctrineRule::new(6, EvenTick, A::OrientToGoal),
        DoctrineRule::new(7, Always, A::MoveForward),
    ]
}

/// First matching rule by priority for every living friendly unit.
pub fn doctrine_policy(view: &ForceView, rules: &[DoctrineRule]) -> ActionSet {
    let mut order: Vec<&DoctrineRule> = rules.iter().collect();
    order.sort_by_key(|r| r.priority);
    let goal = view.goal();
    ActionSet::Discrete(
        view.friendly()
            .map(|unit| {
                let features = encode_vector_obs(view, unit.id, goal).expect("living friendly unit");
                let s = Situation { view, unit, features };
                let action = order.iter().find(|r| r.condition.holds(&s)).map_or(DiscreteAction::NoOp, |r| r.action);
                (unit.id, action)
            })
            .collect(),
    )
}

#[derive(Clone, Debug)]
pub struct Doctrine {
    rules: Vec<DoctrineRule>,
}

impl Doctrine {
    pub fn new(rules: Vec<DoctrineRule>) -> Self {
        Self { rules }
    }
}

impl Commander for Doctrine {
    fn name(&self) -> String {
        "doctrine".into()
    }

    fn act(&mut self, view: &ForceView, _rng: &mut SimRng) -> ActionSet {
        doctrine_policy(view, &self.rules)
    }
}
