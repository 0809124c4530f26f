//! Underspecified environments: levels, resettable simulator state and the
//! two desk-scale domains.
//!
//! A level fixes every free parameter of an environment. The free parameters
//! split into a curriculum-controlled structural part and an *aleatoric* part
//! that the agent cannot observe until the trajectory discloses it. Simulator
//! states are plain values; the dual-simulator protocol only needs
//! [`Environment::snapshot`], [`Environment::restore`] and
//! [`Environment::set_aleatoric`].

pub mod codec;
pub mod fruit_rooms;
pub mod icy_track;
pub mod level_text;

use std::fmt::Debug;

use rand::Rng;

use crate::error::{Error, Result};

pub use codec::SimState;
pub use fruit_rooms::{Fruit, FruitRooms, FruitRoomsConfig, FruitRoomsLevel, FruitRoomsState};
pub use icy_track::{IceAssignment, IcyTrack, IcyTrackConfig, IcyTrackLevel, IcyTrackState};

pub type Action = usize;
pub type Observation = Vec<f64>;

/// Disclosed aleatoric components as `(component index, value)` pairs.
///
/// Evidence only grows over a trajectory; [`Evidence::merge`] rejects an entry
/// that would change an already disclosed value.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Evidence {
    entries: Vec<(usize, u8)>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (usize, u8)>) -> Result<Self> {
        let mut ev = Evidence::new();
        for (i, v) in entries {
            ev.insert(i, v)?;
        }
        Ok(ev)
    }

    pub fn get(&self, index: usize) -> Option<u8> {
        self.entries
            .iter()
            .find(|(i, _)| *i == index)
            .map(|&(_, v)| v)
    }

    /// Adds one entry. Returns `Ok(true)` if it was new, `Ok(false)` if the same
    /// value was already disclosed.
    pub fn insert(&mut self, index: usize, value: u8) -> Result<bool> {
        match self.get(index) {
            Some(v) if v == value => Ok(false),
            Some(v) => Err(Error::GroundingConsistency {
                index,
                disclosed: v,
                proposed: value,
            }),
            None => {
                self.entries.push((index, value));
                Ok(true)
            }
        }
    }

    /// Merges a delta, returning only the entries that were actually new.
    pub fn merge(&mut self, delta: &Evidence) -> Result<Evidence> {
        let mut fresh = Evidence::new();
        for &(i, v) in &delta.entries {
            if self.insert(i, v)? {
                fresh.entries.push((i, v));
            }
        }
        Ok(fresh)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        self.entries.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome<S> {
    pub state: S,
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    /// Aleatoric components disclosed by this transition.
    pub evidence: Evidence,
}

/// A full assignment of an environment's free parameters.
pub trait LevelDescriptor: Clone + Debug + PartialEq + Send + Sync {
    type Aleatoric: Clone + Debug + PartialEq + Send + Sync;

    /// Canonical single-line key-value form; also the buffer dedup key.
    fn to_line(&self) -> String;
    fn from_line(line: &str) -> Result<Self>;

    fn aleatoric(&self) -> Self::Aleatoric;
    fn with_aleatoric(&self, theta: Self::Aleatoric) -> Self;
}

pub trait Environment: Clone + Send + Sync {
    type Level: LevelDescriptor<Aleatoric = Self::Aleatoric>;
    type State: Clone + Debug + PartialEq + Send;
    type Aleatoric: Clone + Debug + PartialEq + Send + Sync;

    fn name(&self) -> &'static str;
    fn num_actions(&self) -> usize;
    fn obs_dim(&self) -> usize;

    /// Checks structural bounds; `reset` calls this first.
    fn validate(&self, level: &Self::Level) -> Result<()>;
    fn reset(&self, level: &Self::Level, seed: u64) -> Result<(Self::State, Observation)>;
    fn step(&self, state: &Self::State, action: Action) -> Result<StepOutcome<Self::State>>;
    fn observe(&self, state: &Self::State) -> Observation;
    fn is_done(&self, state: &Self::State) -> bool;

    fn snapshot(&self, state: &Self::State) -> SimState;
    fn restore(&self, snapshot: &SimState) -> Result<Self::State>;

    /// Replaces every undisclosed aleatoric component of `state` by the value in
    /// `theta`. Components disclosed by the state itself or listed in
    /// `evidence` must agree with `theta`.
    fn set_aleatoric(
        &self,
        state: &Self::State,
        theta: &Self::Aleatoric,
        evidence: &Evidence,
    ) -> Result<Self::State>;

    /// The aleatoric assignment the state currently simulates.
    fn aleatoric_of(&self, state: &Self::State) -> Self::Aleatoric;
}

/// A source of levels; for domain randomization this is the ground-truth
/// distribution over all free parameters.
pub trait LevelGenerator<L>: Send + Sync {
    fn sample(&self, rng: &mut dyn rand::RngCore) -> L;
}

/// Stateful wrapper pairing an environment with its current state, used for
/// the real and the fictitious simulator.
#[derive(Clone, Debug)]
pub struct Simulator<E: Environment> {
    pub env: E,
    state: Option<E::State>,
}

impl<E: Environment> Simulator<E> {
    pub fn new(env: E) -> Self {
        Self { env, state: None }
    }

    pub fn reset(&mut self, level: &E::Level, seed: u64) -> Result<Observation> {
        let (s, o) = self.env.reset(level, seed)?;
        self.state = Some(s);
        Ok(o)
    }

    pub fn state(&self) -> Result<&E::State> {
        self.state
            .as_ref()
            .ok_or_else(|| Error::contract("simulator has no state; call reset first"))
    }

    pub fn set_state(&mut self, state: E::State) {
        self.state = Some(state);
    }

    pub fn restore(&mut self, snapshot: &SimState) -> Result<()> {
        self.state = Some(self.env.restore(snapshot)?);
        Ok(())
    }

    pub fn snapshot(&self) -> Result<SimState> {
        Ok(self.env.snapshot(self.state()?))
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome<E::State>> {
        let out = self.env.step(self.state()?, action)?;
        self.state = Some(out.state.clone());
        Ok(out)
    }
}

/// Uniform-random action, used by sanity checks and scripted baselines.
pub fn random_action<R: Rng + ?Sized>(env: &impl Environment, rng: &mut R) -> Action {
    rng.random_range(0..env.num_actions())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evidence_is_monotone_and_consistent() {
        let mut ev = Evidence::new();
        assert!(ev.insert(3, 1).unwrap());
        assert!(!ev.insert(3, 1).unwrap());
        assert!(matches!(
            ev.insert(3, 0),
            Err(Error::GroundingConsistency { index: 3, .. })
        ));
        let delta = Evidence::from_entries([(3, 1), (4, 0)]).unwrap();
        let fresh = ev.merge(&delta).unwrap();
        assert_eq!(fresh.iter().collect::<Vec<_>>(), vec![(4, 0)]);
        assert_eq!(ev.len(), 2);
    }
}
