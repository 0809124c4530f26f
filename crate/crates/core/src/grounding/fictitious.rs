//! Naive grounding and the dual-simulator fictitious transition.

use rand::RngCore;

use crate::env::{Action, Environment, LevelDescriptor, Observation, SimState, Simulator};
use crate::error::Result;

use super::belief::{Belief, Grounded};

/// A transition of the fictitious simulator from a posterior-resampled copy
/// of the real state.
#[derive(Clone, Debug, PartialEq)]
pub struct FictitiousTransition<S> {
    pub state: S,
    pub action: Action,
    pub reward: f64,
    pub next_state: S,
    pub observation: Observation,
    pub done: bool,
}

/// Replaces the aleatoric part of `level` by a fresh draw from the prior.
pub fn naive_ground<E: Grounded>(env: &E, level: &E::Level, prior: &E::Prior, rng: &mut dyn RngCore) -> E::Level {
    let theta = env.belief(prior, level).sample_aleatoric(rng);
    level.with_aleatoric(theta)
}

/// Restores `fict` to the real snapshot, resamples the aleatoric part from
/// `belief` and steps with `action`. The real simulator is not touched.
pub fn fictitious_step<E: Grounded>(
    fict: &mut Simulator<E>,
    real: &SimState,
    belief: &E::Belief,
    action: Action,
    rng: &mut dyn RngCore,
) -> Result<FictitiousTransition<E::State>> {
    fict.restore(real)?;
    let theta = belief.sample_aleatoric(rng);
    let grounded = fict.env.set_aleatoric(fict.state()?, &theta, belief.evidence())?;
    fict.set_state(grounded.clone());
    let out = fict.step(action)?;
    Ok(FictitiousTransition {
        state: grounded,
        action,
        reward: out.reward,
        next_state: out.state,
        observation: out.observation,
        done: out.done,
    })
}

/// Snapshot pair `(s′_t, s′_{t+1})` of a fictitious transition.
pub fn transition_snapshots<E: Environment>(env: &E, t: &FictitiousTransition<E::State>) -> (SimState, SimState) {
    (env.snapshot(&t.state), env.snapshot(&t.next_state))
}
