//! Gym-style environment over the simulator: reset/step, fog-filtered
//! observation encoders, action decoders and reward schemes.

mod action;
mod obs;
mod reward;
mod view;

pub use action::{decode_compound, decode_discrete, ActionSet, CompoundAction, CompoundId, DiscreteAction, SPEED_STEP};
pub use obs::{
    encode_spatial_obs, encode_vector_obs, feature_index, SpatialConfig, SpatialObservation, FEATURE_NAMES,
    MINIMAP_LAYERS, MINIMAP_NAMES, NONSPATIAL, NONSPATIAL_NAMES, SCREEN_LAYERS, SCREEN_NAMES, VECTOR_FEATURES,
};
pub use reward::{attrition_events, reward, reward_attrition, reward_tigerclaw};
pub use view::{ForceView, RouteCache};

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commanders::{self, Commander};
use crate::rng::SimRng;
use crate::scenario::{build_world, Scenario, ValidationErrors};
use crate::sim::{advance_tick, CombatEvent, EventKind, Force, Order, Region, SimError, UnitId, WorldState};

const OPPONENT_SALT: u64 = 0x6f70_706f;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("unit {0} is not a living unit of the controlled force")]
    NotControllable(UnitId),
    #[error("episode is done; call reset")]
    EpisodeDone,
    #[error("environment has not been reset")]
    NotReset,
    #[error("the opponent is externally controlled and sent no actions")]
    OpponentActionsRequired,
    #[error(transparent)]
    Scenario(#[from] ValidationErrors),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ObsMode {
    Vector,
    Spatial(SpatialConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub obs_mode: ObsMode,
    /// When false the controlled force perceives every living enemy.
    pub fog: bool,
    pub controlled: Force,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self { obs_mode: ObsMode::Vector, fog: true, controlled: Force::Blue }
    }
}

impl EnvConfig {
    pub fn spatial(n: usize) -> Self {
        Self { obs_mode: ObsMode::Spatial(SpatialConfig { n, ..SpatialConfig::default() }), ..Self::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Observation {
    /// One 17-feature row per living controlled unit, in id order.
    Vector {
        units: Vec<(UnitId, [f64; VECTOR_FEATURES])>,
    },
    Spatial(SpatialObservation),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ForceDestroyed,
    ObjectivesHeld,
    MaxTicks,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::ForceDestroyed => "force_destroyed",
            Termination::ObjectivesHeld => "objectives_held",
            Termination::MaxTicks => "max_ticks",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub events: Vec<CombatEvent>,
    pub score: f64,
    pub tick: u64,
    pub termination: Option<Termination>,
    /// Ignored actions (e.g. for units that died earlier).
    pub diagnostics: Vec<String>,
    /// Destroyed counts so far, indexed by `Force::index`.
    pub casualties: [u32; 2],
    /// Orders applied this tick, indexed by `Force::index`. The controlled
    /// force's orders were applied first.
    pub orders: [Vec<Order>; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Orders produced for one force plus ignored-action diagnostics.
pub fn decode_actions(view: &ForceView, actions: &ActionSet) -> Result<(Vec<Order>, Vec<String>), EnvError> {
    let mut diagnostics = Vec::new();
    for id in actions.units() {
        match view.own_units().find(|u| u.id == id) {
            None => return Err(EnvError::NotControllable(id)),
            Some(u) if !u.alive() => diagnostics.push(format!("action for dead unit {id} ignored")),
            Some(_) => {}
        }
    }
    let living = |id: UnitId| view.friendly().find(|u| u.id == id);
    let mut orders = Vec::new();
    match actions {
        ActionSet::Discrete(v) => {
            for (id, a) in v {
                if let Some(u) = living(*id) {
                    orders.extend(decode_discrete(view, u, *a));
                }
            }
        }
        ActionSet::Compound(v) => {
            for (id, a) in v {
                if let Some(u) = living(*id) {
                    orders.extend(decode_compound(view, u, *a));
                }
            }
        }
        ActionSet::Orders(v) => orders.extend(v.iter().filter(|o| living(o.unit).is_some()).cloned()),
    }
    Ok((orders, diagnostics))
}

pub struct Env {
    scenario: Arc<Scenario>,
    config: EnvConfig,
    opponent: Option<Box<dyn Commander>>,
    routes: RouteCache,
    objectives: Vec<Region>,
    world: Option<WorldState>,
    opponent_rng: SimRng,
    score: f64,
    done: bool,
    termination: Option<Termination>,
    casualties: [u32; 2],
}

impl Env {
    /// Environment whose opponent is the scenario's Red controller (or
    /// none when the controlled force is Red).
    pub fn new(scenario: Arc<Scenario>, config: EnvConfig) -> Result<Self, EnvError> {
        scenario.validate()?;
        let terrain = Arc::new(scenario.terrain.build(scenario.cell_km)?);
        let opponent = match config.controlled {
            Force::Blue => commanders::from_spec(&scenario.red_controller),
            Force::Red => None,
        };
        let objectives = scenario.objective_regions().cloned().collect();
        Ok(Self {
            scenario,
            config,
            opponent,
            routes: RouteCache::new(terrain),
            objectives,
            world: None,
            opponent_rng: SimRng::new(0),
            score: 0.0,
            done: false,
            termination: None,
            casualties: [0; 2],
        })
    }

    pub fn with_opponent(mut self, opponent: Option<Box<dyn Commander>>) -> Self {
        self.opponent = opponent;
        self
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn controlled(&self) -> Force {
        self.config.controlled
    }

    /// Ground truth, for harness code only.
    pub fn world(&self) -> Option<&WorldState> {
        self.world.as_ref()
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn termination(&self) -> Option<Termination> {
        self.termination
    }

    pub fn casualties(&self) -> [u32; 2] {
        self.casualties
    }

    pub fn opponent_name(&self) -> String {
        self.opponent.as_ref().map_or_else(|| "external".into(), |o| o.name())
    }

    pub fn routes(&self) -> &RouteCache {
        &self.routes
    }

    pub fn reset(&mut self, seed: u64) -> Result<Observation, EnvError> {
        self.world = Some(build_world(&self.scenario, seed)?);
        self.opponent_rng = SimRng::derived(seed, OPPONENT_SALT);
        if let Some(o) = self.opponent.as_mut() {
            o.reset();
        }
        self.score = 0.0;
        self.done = false;
        self.termination = None;
        self.casualties = [0; 2];
        self.observe()
    }

    /// View of `force` with the given omniscience.
    pub fn view_as(&self, force: Force, omniscient: bool) -> Result<ForceView<'_>, EnvError> {
        let world = self.world.as_ref().ok_or(EnvError::NotReset)?;
        let score = if force == self.config.controlled { self.score } else { -self.score };
        Ok(ForceView::new(world, force, self.scenario.goals.of(force), omniscient, &self.routes)
            .with_episode(self.scenario.max_ticks, score))
    }

    /// The controlled force's view (omniscient when fog is disabled).
    pub fn view(&self) -> Result<ForceView<'_>, EnvError> {
        self.view_as(self.config.controlled, !self.config.fog)
    }

    pub fn observe(&self) -> Result<Observation, EnvError> {
        let view = self.view()?;
        Ok(match &self.config.obs_mode {
            ObsMode::Vector => {
                let goal = view.goal();
                let units = view
                    .friendly()
                    .map(|u| encode_vector_obs(&view, u.id, goal).map(|f| (u.id, f)))
                    .collect::<Result<_, _>>()?;
                Observation::Vector { units }
            }
            ObsMode::Spatial(cfg) => Observation::Spatial(encode_spatial_obs(&view, cfg, &self.objectives)),
        })
    }

    pub fn step(&mut self, actions: &ActionSet) -> Result<StepResult, EnvError> {
        self.step_with(actions, None)
    }

    /// Step with explicit actions for the opponent force; they take
    /// precedence over the built-in opponent controller.
    pub fn step_with(
        &mut self,
        actions: &ActionSet,
        opponent_actions: Option<&ActionSet>,
    ) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        let me = self.config.controlled;
        let (mut orders, mut diagnostics) = decode_actions(&self.view()?, actions)?;
        let theirs = match (opponent_actions, self.opponent.as_mut()) {
            (Some(a), _) => {
                let view = self.world.as_ref().map(|w| {
                    ForceView::new(w, me.opponent(), self.scenario.goals.of(me.opponent()), false, &self.routes)
                });
                decode_actions(&view.ok_or(EnvError::NotReset)?, a)?
            }
            (None, Some(opponent)) => {
                let world = self.world.as_ref().ok_or(EnvError::NotReset)?;
                let view = ForceView::new(
                    world,
                    me.opponent(),
                    self.scenario.goals.of(me.opponent()),
                    opponent.full_vision(),
                    &self.routes,
                )
                .with_episode(self.scenario.max_ticks, -self.score);
                let a = opponent.act(&view, &mut self.opponent_rng);
                decode_actions(&view, &a)?
            }
            (None, None) => return Err(EnvError::OpponentActionsRequired),
        };
        let mut applied: [Vec<Order>; 2] = Default::default();
        applied[me.opponent().index()] = theirs.0.clone();
        orders.extend(theirs.0);
        diagnostics.extend(theirs.1);

        let world = self.world.as_mut().ok_or(EnvError::NotReset)?;
        let events = advance_tick(world, &orders)?;
        orders.truncate(orders.len() - applied[me.opponent().index()].len());
        applied[me.index()] = orders;
        let reward = reward(&self.scenario.reward_scheme, &events, world, me, self.scenario.goals.of(me));
        self.score += reward;
        for e in events.iter().filter(|e| e.kind == EventKind::Destroyed) {
            self.casualties[world.units[e.actor.index()].force.index()] += 1;
        }
        self.termination = self.check_termination();
        self.done = self.termination.is_some();
        let world = self.world.as_ref().expect("reset");
        Ok(StepResult {
            observation: self.observe()?,
            reward,
            done: self.done,
            info: StepInfo {
                events,
                score: self.score,
                tick: world.tick,
                termination: self.termination,
                diagnostics,
                casualties: self.casualties,
                orders: applied,
            },
        })
    }

    fn check_termination(&self) -> Option<Termination> {
        termination_of(self.world.as_ref()?, &self.objectives, self.scenario.max_ticks)
    }
}

/// How an episode in `world` ends, if it has: a fielded force was wiped
/// out, Blue holds every objective region, or the tick limit was reached.
pub fn termination_of(world: &WorldState, objectives: &[Region], max_ticks: u64) -> Option<Termination> {
    let fielded = |f: Force| world.units.iter().any(|u| u.force == f);
    if Force::BOTH.iter().any(|&f| fielded(f) && world.living_units(f).next().is_none()) {
        return Some(Termination::ForceDestroyed);
    }
    if !objectives.is_empty() && objectives.iter().all(|r| blue_holds(world, r)) {
        return Some(Termination::ObjectivesHeld);
    }
    (world.tick >= max_ticks).then_some(Termination::MaxTicks)
}

/// Blue holds a region when at least one living Blue unit and no living Red
/// unit stand in it.
pub fn blue_holds(world: &WorldState, region: &Region) -> bool {
    world.living_units(Force::Blue).any(|u| region.contains(u.position))
        && !world.living_units(Force::Red).any(|u| region.contains(u.position))
}
