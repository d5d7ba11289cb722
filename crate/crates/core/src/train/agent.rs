use std::collections::BTreeMap;
use std::sync::Arc;

use crate::commanders::Commander;
use crate::env::{
    encode_spatial_obs, encode_vector_obs, ActionSet, CompoundAction, CompoundId, DiscreteAction, ForceView, ObsMode,
    SpatialConfig, MINIMAP_LAYERS, NONSPATIAL, SCREEN_LAYERS, VECTOR_FEATURES,
};
use crate::nn::{LstmState, NetInput, NetMode, NnError, PolicyNet};
use crate::rng::SimRng;
use crate::scenario::Scenario;
use crate::sim::{Region, UnitId};

/// Index of the largest probability; ties go to the lowest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

pub fn choose(p: &[f64], greedy: bool, rng: &mut SimRng) -> usize {
    if greedy {
        argmax(p)
    } else {
        rng.categorical(p)
    }
}

/// Observation mode matching a network's input layout.
pub fn obs_mode_for(net: &PolicyNet) -> Result<ObsMode, NnError> {
    match net.config().mode {
        NetMode::Vector { features: VECTOR_FEATURES, actions: DiscreteAction::COUNT } => Ok(ObsMode::Vector),
        NetMode::Spatial {
            n,
            minimap: MINIMAP_LAYERS,
            screen: SCREEN_LAYERS,
            nonspatial: NONSPATIAL,
            ids: CompoundId::COUNT,
        } => Ok(ObsMode::Spatial(SpatialConfig { n, ..SpatialConfig::default() })),
        _ => Err(NnError::Mode("network layout does not match the environment spaces")),
    }
}

/// A trained network driving one force. Vector-mode networks act per unit
/// with parameters shared across units and one recurrent state per unit;
/// spatial-mode networks issue one compound action to the whole force.
pub struct LearnedCommander {
    net: Arc<PolicyNet>,
    mode: ObsMode,
    greedy: bool,
    omniscient: bool,
    objectives: Vec<Region>,
    unit_states: BTreeMap<UnitId, LstmState>,
    force_state: LstmState,
}

impl LearnedCommander {
    pub fn new(net: Arc<PolicyNet>, scenario: &Scenario, greedy: bool) -> Result<Self, NnError> {
        let mode = obs_mode_for(&net)?;
        let force_state = net.initial_state();
        Ok(Self {
            net,
            mode,
            greedy,
            omniscient: false,
            objectives: scenario.objective_regions().cloned().collect(),
            unit_states: BTreeMap::new(),
            force_state,
        })
    }

    /// Observe the whole map, matching training with fog disabled.
    pub fn omniscient(mut self, on: bool) -> Self {
        self.omniscient = on;
        self
    }
}

impl Commander for LearnedCommander {
    fn name(&self) -> String {
        "learned".into()
    }

    fn act(&mut self, view: &ForceView, rng: &mut SimRng) -> ActionSet {
        match &self.mode {
            ObsMode::Vector => {
                let mut actions = Vec::new();
                for u in view.friendly() {
                    let x = encode_vector_obs(view, u.id, view.goal()).expect("own living unit");
                    let state = self.unit_states.entry(u.id).or_insert_with(|| self.net.initial_state());
                    let out = self.net.forward(NetInput::Vector(&x), state).expect("validated layout");
                    *state = out.state;
                    let a = choose(&out.heads[0], self.greedy, rng);
                    actions.push((u.id, DiscreteAction::ALL[a]));
                }
                ActionSet::Discrete(actions)
            }
            ObsMode::Spatial(cfg) => {
                let obs = encode_spatial_obs(view, cfg, &self.objectives);
                let out = self.net.forward(NetInput::from(&obs), &self.force_state).expect("validated layout");
                self.force_state = out.state;
                let id = choose(&out.heads[0], self.greedy, rng);
                let xb = choose(&out.heads[1], self.greedy, rng);
                let yb = choose(&out.heads[2], self.greedy, rng);
                ActionSet::broadcast(view, CompoundAction::from_bins(CompoundId::ALL[id], xb, yb, cfg.n))
            }
        }
    }

    fn full_vision(&self) -> bool {
        self.omniscient
    }

    fn reset(&mut self) {
        self.unit_states.clear();
        self.force_state = self.net.initial_state();
    }
}
