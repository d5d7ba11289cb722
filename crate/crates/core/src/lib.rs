//! Tactical command-and-control wargaming: a deterministic combat simulator,
//! declarative scenarios, a gym-style environment, baseline commanders, a
//! small neural-network stack and advantage actor-critic training.

pub mod commanders;
pub mod env;
pub mod hash;
pub mod nn;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod train;

pub use env::{ActionSet, DiscreteAction, Env, EnvConfig, Observation};
pub use rng::SimRng;
pub use scenario::{build_world, parse_scenario, Scenario};
pub use sim::{advance_tick, CombatEvent, Force, Order, UnitId, WorldState};
