//! Non-learning controllers: uniform random, scripted courses of action, a
//! prioritized doctrine rule engine and a leveled bot.

mod bot;
mod coa;
mod doctrine;
mod random;

pub use bot::{bot_policy, Bot, BotConfig};
pub use coa::{scripted_coa_step, CoaGroup, CoaScript, Posture, ScriptedCommander, Waypoint};
pub use doctrine::{default_rules, doctrine_policy, validate_rules, Condition, Doctrine, DoctrineRule};
pub use random::{random_policy, RandomCommander};

use crate::env::{ActionSet, ForceView};
use crate::rng::SimRng;
use crate::scenario::ControllerSpec;

/// A controller for one force. `act` sees only the supplied view; a
/// commander that returns true from `full_vision` is handed an omniscient
/// view.
pub trait Commander: Send {
    fn name(&self) -> String;

    fn act(&mut self, view: &ForceView, rng: &mut SimRng) -> ActionSet;

    fn full_vision(&self) -> bool {
        false
    }

    /// Clear per-episode state.
    fn reset(&mut self) {}
}

/// Build the controller named by a scenario; `External` has none.
pub fn from_spec(spec: &ControllerSpec) -> Option<Box<dyn Commander>> {
    match spec {
        ControllerSpec::Scripted { coa } => Some(Box::new(ScriptedCommander::new(coa.clone()))),
        ControllerSpec::Bot { level } => Some(Box::new(Bot::new(BotConfig::new(*level)))),
        ControllerSpec::Doctrine { rules } => {
            Some(Box::new(Doctrine::new(rules.clone().unwrap_or_else(default_rules))))
        }
        ControllerSpec::External => None,
    }
}

/// Parse a command-line opponent/policy name: `random`, `doctrine`,
/// `bot:<level>`.
pub fn by_name(name: &str) -> Option<Box<dyn Commander>> {
    match name {
        "random" => Some(Box::new(RandomCommander)),
        "doctrine" => Some(Box::new(Doctrine::new(default_rules()))),
        _ => {
            let level: u8 = name.strip_prefix("bot:")?.parse().ok()?;
            (1..=10).contains(&level).then(|| Box::new(Bot::new(BotConfig::new(level))) as Box<dyn Commander>)
        }
    }
}
