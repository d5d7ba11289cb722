use std::collections::BTreeMap;

use super::Commander;
use crate::env::{ActionSet, CompoundAction, CompoundId, ForceView};
use crate::rng::SimRng;
use crate::sim::{Pos, UnitId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BotConfig {
    pub level: u8,
}

impl BotConfig {
    pub fn new(level: u8) -> Self {
        assert!((1..=10).contains(&level), "bot level {level} outside 1..=10");
        Self { level }
    }

    /// Ticks between re-plans.
    pub fn period(&self) -> u64 {
        11 - self.level as u64
    }

    /// Fraction of living units committed to the attack.
    pub fn aggression(&self) -> f64 {
        self.level as f64 / 10.0
    }

    pub fn full_map_vision(&self) -> bool {
        self.level == 10
    }

    pub fn committed(&self, living: usize) -> usize {
        ((self.aggression() * living as f64) - 1e-9).ceil().max(0.0) as usize
    }
}

/// Where a committed unit is headed.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Objective {
    Enemy(UnitId, Pos),
    Point(Pos),
}

#[derive(Clone, Debug)]
pub struct Bot {
    config: BotConfig,
    plan: BTreeMap<UnitId, Objective>,
}

impl Bot {
    pub fn new(config: BotConfig) -> Self {
        Self { config, plan: BTreeMap::new() }
    }

    pub fn config(&self) -> BotConfig {
        self.config
    }

    fn replan(&mut self, view: &ForceView) {
        self.plan.clear();
        let living: Vec<_> = view.friendly().collect();
        let k = self.config.committed(living.len());
        let mut ranked: Vec<_> = living
            .iter()
            .map(|u| {
                let target = view.nearest_enemy(u.position);
                let d = target.map_or(f64::INFINITY, |e| e.position.dist(u.position));
                (d, u.id, target.map(|e| Objective::Enemy(e.id, e.position)))
            })
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, id, target) in ranked.into_iter().take(k) {
            self.plan.insert(id, target.unwrap_or(Objective::Point(view.goal())));
        }
    }
}

/// One bot decision: re-plan every `period` ticks, then drive committed
/// units at their objectives with compound Attack; uncommitted units hold.
pub fn bot_policy(bot: &mut Bot, view: &ForceView) -> ActionSet {
    if view.tick().is_multiple_of(bot.config.period()) {
        bot.replan(view);
    }
    let t = view.terrain();
    let (w, h) = (t.width(), t.height());
    let mut out = Vec::new();
    for u in view.friendly() {
        let Some(obj) = bot.plan.get_mut(&u.id) else { continue };
        let aim = match *obj {
            Objective::Enemy(id, last) => match view.unit(id).filter(|e| e.alive()) {
                Some(e) => {
                    *obj = Objective::Enemy(id, e.position);
                    e.position
                }
                None => match view.nearest_enemy(u.position) {
                    Some(e) => {
                        *obj = Objective::Enemy(e.id, e.position);
                        e.position
                    }
                    None => last,
                },
            },
            Objective::Point(p) => match view.nearest_enemy(u.position) {
                Some(e) => {
                    *obj = Objective::Enemy(e.id, e.position);
                    e.position
                }
                None => p,
            },
        };
        out.push((u.id, CompoundAction::at(CompoundId::Attack, aim, w, h)));
    }
    ActionSet::Compound(out)
}

impl Commander for Bot {
    fn name(&self) -> String {
        format!("bot:{}", self.config.level)
    }

    fn act(&mut self, view: &ForceView, _rng: &mut SimRng) -> ActionSet {
        bot_policy(self, view)
    }

    fn full_vision(&self) -> bool {
        self.config.full_map_vision()
    }

    fn reset(&mut self) {
        self.plan.clear();
    }
}
