use crate::scenario::RewardScheme;
use crate::sim::{distance_km, CombatEvent, EventKind, Force, Pos, WorldState};

/// TigerClaw game score for one tick's events, from Blue's point of view.
/// `force_of` resolves an event's actor to its force.
pub fn reward_tigerclaw(
    events: &[CombatEvent],
    force_of: impl Fn(CombatEvent) -> Force,
    crossed: f64,
    retreated: f64,
    enemy_destroyed: f64,
    friendly_destroyed: f64,
) -> f64 {
    events
        .iter()
        .map(|&e| match (e.kind, force_of(e)) {
            (EventKind::Crossed, Force::Blue) => crossed,
            (EventKind::Retreated, Force::Blue) => retreated,
            (EventKind::Destroyed, Force::Red) => enemy_destroyed,
            (EventKind::Destroyed, Force::Blue) => friendly_destroyed,
            _ => 0.0,
        })
        .sum()
}

/// Event part of the attrition reward for `force`.
pub fn attrition_events(
    events: &[CombatEvent],
    force_of: impl Fn(CombatEvent) -> Force,
    force: Force,
    weights: [f64; 4],
) -> f64 {
    let [friendly_damaged, friendly_destroyed, enemy_damaged, enemy_destroyed] = weights;
    events
        .iter()
        .map(|&e| {
            let friendly = force_of(e) == force;
            match (e.kind, friendly) {
                (EventKind::Damaged, true) => friendly_damaged,
                (EventKind::Destroyed, true) => friendly_destroyed,
                (EventKind::Damaged, false) => enemy_damaged,
                (EventKind::Destroyed, false) => enemy_destroyed,
                _ => 0.0,
            }
        })
        .sum()
}

/// Attrition reward: event scores minus `km_penalty` × distance to goal
/// summed over the force's living units after the tick.
pub fn reward_attrition(
    events: &[CombatEvent],
    world: &WorldState,
    force: Force,
    goal: Pos,
    scheme: &RewardScheme,
) -> f64 {
    let RewardScheme::Attrition { friendly_damaged, friendly_destroyed, enemy_damaged, enemy_destroyed, km_penalty } =
        *scheme
    else {
        return 0.0;
    };
    let ev = attrition_events(
        events,
        |e| world.units[e.actor.index()].force,
        force,
        [friendly_damaged, friendly_destroyed, enemy_damaged, enemy_destroyed],
    );
    let km: f64 = world.living_units(force).map(|u| distance_km(world, u.position, goal)).sum();
    ev - km_penalty * km
}

/// Reward for `force` under `scheme`. TigerClaw is scored for Blue and
/// negated for Red.
pub fn reward(scheme: &RewardScheme, events: &[CombatEvent], world: &WorldState, force: Force, goal: Pos) -> f64 {
    match *scheme {
        RewardScheme::Tigerclaw { crossed, retreated, enemy_destroyed, friendly_destroyed } => {
            let blue = reward_tigerclaw(
                events,
                |e| world.units[e.actor.index()].force,
                crossed,
                retreated,
                enemy_destroyed,
                friendly_destroyed,
            );
            if force == Force::Blue {
                blue
            } else {
                -blue
            }
        }
        RewardScheme::Attrition { .. } => reward_attrition(events, world, force, goal, scheme),
    }
}
