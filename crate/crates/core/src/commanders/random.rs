use super::Commander;
use crate::env::{ActionSet, DiscreteAction, ForceView};
use crate::rng::SimRng;

/// Uniform choice from `legal` for every living friendly unit.
pub fn random_policy(view: &ForceView, legal: &[DiscreteAction], rng: &mut SimRng) -> ActionSet {
    if legal.is_empty() {
        return ActionSet::empty();
    }
    ActionSet::Discrete(view.friendly().map(|u| (u.id, legal[rng.below(legal.len() as u64) as usize])).collect())
}

#[derive(Clone, Debug, Default)]
pub struct RandomCommander;

impl Commander for RandomCommander {
    fn name(&self) -> String {
        "random".into()
    }

    fn act(&mut self, view: &ForceView, rng: &mut SimRng) -> ActionSet {
        random_policy(view, &DiscreteAction::ALL, rng)
    }
}
