use std::collections::BTreeMap;
use std::sync::Arc;

use super::loss::{StepRecord, Trajectory};
use super::{OpponentSpec, TrainConfig, TrainError};
use crate::env::{ActionSet, CompoundAction, CompoundId, DiscreteAction, Env, EnvConfig, Observation};
use crate::nn::{LstmState, NetInput, PolicyNet};
use crate::rng::SimRng;
use crate::scenario::Scenario;
use crate::sim::{Force, UnitId};

/// Key of the single force-level sequence in spatial mode.
const FORCE_KEY: UnitId = UnitId(u32::MAX);
const ACTION_SALT: u64 = 0x6163_7400;
const EPISODE_SALT: u64 = 0x6570_6900;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeStats {
    pub reward: f64,
    pub length: u64,
    pub casualties: [u32; 2],
}

/// Trajectories from one n-step segment plus episodes finished in it.
#[derive(Debug, Default)]
pub struct Segment {
    pub trajectories: Vec<Trajectory>,
    pub episodes: Vec<EpisodeStats>,
    pub env_steps: u64,
}

/// One rollout worker: an environment it owns exclusively, its recurrent
/// states and the sequences still open at the last segment boundary.
pub struct Worker {
    env: Env,
    obs: Observation,
    rng: SimRng,
    episode_seeds: SimRng,
    states: BTreeMap<UnitId, LstmState>,
    episode_reward: f64,
}

impl Worker {
    /// `generation` counts restarts so a replacement worker draws fresh
    /// episodes.
    pub fn new(
        scenario: &Arc<Scenario>,
        config: &TrainConfig,
        opponent: &OpponentSpec,
        id: usize,
        generation: u64,
    ) -> Result<Self, TrainError> {
        let env_config =
            EnvConfig { obs_mode: config.obs_mode.clone(), fog: config.fog, controlled: config.controlled };
        let mut env = opponent.attach(Env::new(scenario.clone(), env_config)?, config.controlled)?;
        let salt = id as u64 + (generation << 16);
        let mut episode_seeds = SimRng::derived(config.seed, EPISODE_SALT + salt);
        let obs = env.reset(episode_seeds.next_u64())?;
        Ok(Self {
            env,
            obs,
            rng: SimRng::derived(config.seed, ACTION_SALT + salt),
            episode_seeds,
            states: BTreeMap::new(),
            episode_reward: 0.0,
        })
    }

    pub fn controlled(&self) -> Force {
        self.env.controlled()
    }

    /// Collect up to `n_steps` environment steps with `net` sampling
    /// actions. Units keep their own recurrent state and sequence; a unit's
    /// sequence closes when it dies or the episode ends.
    pub fn collect(&mut self, net: &PolicyNet, n_steps: usize) -> Result<Segment, TrainError> {
        let mut seg = Segment::default();
        let mut open: BTreeMap<UnitId, Trajectory> = BTreeMap::new();
        for _ in 0..n_steps {
            let mut pending = Vec::new();
            let actions = match &self.obs {
                Observation::Vector { units } => {
                    let mut acts = Vec::with_capacity(units.len());
                    for (id, x) in units {
                        let state = self.states.entry(*id).or_insert_with(|| net.initial_state());
                        let traj = open.entry(*id).or_insert_with(|| Trajectory::new(state.clone()));
                        let out = net.forward_recorded(NetInput::Vector(x), state, &mut traj.tape)?;
                        let a = self.rng.categorical(&out.heads[0]);
                        *state = out.state;
                        acts.push((*id, DiscreteAction::ALL[a]));
                        pending.push((*id, vec![Some(a)], out.heads, out.value));
                    }
                    ActionSet::Discrete(acts)
                }
                Observation::Spatial(obs) => {
                    let state = self.states.entry(FORCE_KEY).or_insert_with(|| net.initial_state());
                    let traj = open.entry(FORCE_KEY).or_insert_with(|| Trajectory::new(state.clone()));
                    let out = net.forward_recorded(NetInput::from(obs), state, &mut traj.tape)?;
                    *state = out.state;
                    let id = self.rng.categorical(&out.heads[0]);
                    let xb = self.rng.categorical(&out.heads[1]);
                    let yb = self.rng.categorical(&out.heads[2]);
                    let targeted = CompoundId::ALL[id] != CompoundId::NoOp;
                    pending.push((
                        FORCE_KEY,
                        vec![Some(id), targeted.then_some(xb), targeted.then_some(yb)],
                        out.heads,
                        out.value,
                    ));
                    ActionSet::broadcast(
                        &self.env.view()?,
                        CompoundAction::from_bins(CompoundId::ALL[id], xb, yb, obs.n),
                    )
                }
            };
            let result = self.env.step(&actions)?;
            seg.env_steps += 1;
            self.episode_reward += result.reward;
            let alive: Vec<UnitId> = match &result.observation {
                Observation::Vector { units } => units.iter().map(|(id, _)| *id).collect(),
                Observation::Spatial(_) => vec![FORCE_KEY],
            };
            for (id, actions, probs, value) in pending {
                let done = result.done || !alive.contains(&id);
                let traj = open.get_mut(&id).expect("opened above");
                traj.steps.push(StepRecord { actions, probs, value, reward: result.reward, done });
                if done {
                    seg.trajectories.push(open.remove(&id).expect("open"));
                    self.states.remove(&id);
                }
            }
            if result.done {
                seg.episodes.push(EpisodeStats {
                    reward: self.episode_reward,
                    length: result.info.tick,
                    casualties: result.info.casualties,
                });
                self.episode_reward = 0.0;
                self.states.clear();
                self.obs = self.env.reset(self.episode_seeds.next_u64())?;
            } else {
                self.obs = result.observation;
            }
        }
        for (id, mut traj) in open {
            traj.bootstrap = self.value_of(net, id)?;
            seg.trajectories.push(traj);
        }
        Ok(seg)
    }

    fn value_of(&self, net: &PolicyNet, id: UnitId) -> Result<f64, TrainError> {
        let init = net.initial_state();
        let state = self.states.get(&id).unwrap_or(&init);
        let out = match &self.obs {
            Observation::Vector { units } => match units.iter().find(|(u, _)| *u == id) {
                Some((_, x)) => net.forward(NetInput::Vector(x), state)?,
                None => return Ok(0.0),
            },
            Observation::Spatial(obs) => net.forward(NetInput::from(obs), state)?,
        };
        Ok(out.value)
    }
}
