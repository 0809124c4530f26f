//! Exact conjugate beliefs over the aleatoric parameters.

use rand::{Rng, RngCore};
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::env::fruit_rooms::FRUIT_COMPONENT;
use crate::env::icy_track::IceRate;
use crate::env::{
    Environment, Evidence, Fruit, FruitRooms, FruitRoomsLevel, IceAssignment, IcyTrack, IcyTrackLevel,
};
use crate::error::{Error, Result};

/// Counts and posterior parameters, logged per episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefSummary {
    pub disclosed: usize,
    pub positive: usize,
    pub negative: usize,
    /// `[α', β']` for a Beta posterior, `[q]` for a point mass or Bernoulli.
    pub params: Vec<f64>,
}

pub trait Belief: Clone + Send {
    type Aleatoric;

    /// Folds newly disclosed components into the posterior.
    fn posterior_update(&mut self, delta: &Evidence) -> Result<()>;
    fn evidence(&self) -> &Evidence;
    /// Draws a full assignment from the posterior, agreeing with all evidence.
    fn sample_aleatoric(&self, rng: &mut dyn RngCore) -> Self::Aleatoric;
    fn summary(&self) -> BeliefSummary;
}

/// Environments with a known ground-truth prior over their aleatoric part.
pub trait Grounded: Environment {
    type Prior: Clone + std::fmt::Debug + Send + Sync;
    type Belief: Belief<Aleatoric = Self::Aleatoric>;

    /// Prior belief for a level; only the structural part of `level` is used.
    fn belief(&self, prior: &Self::Prior, level: &Self::Level) -> Self::Belief;
}

/// Beta-Bernoulli belief over a track's ice bits with rate `q ~ Beta(α, β)`.
/// A `Fixed` prior is a point mass on `q` and stays one.
#[derive(Clone, Debug, PartialEq)]
pub struct IceBelief {
    pub prior: IceRate,
    pub length: usize,
    evidence: Evidence,
    pub n_ice: usize,
    pub n_dry: usize,
}

impl IceBelief {
    pub fn new(prior: IceRate, length: usize) -> Self {
        IceBelief {
            prior,
            length,
            evidence: Evidence::new(),
            n_ice: 0,
            n_dry: 0,
        }
    }

    /// Posterior over the rate: `Beta(α + N₊, β + N₋)`, or the fixed `q`.
    pub fn posterior(&self) -> IceRate {
        match self.prior {
            IceRate::Beta { alpha, beta } => IceRate::Beta {
                alpha: alpha + self.n_ice as f64,
                beta: beta + self.n_dry as f64,
            },
            fixed => fixed,
        }
    }

    /// Probability that an undisclosed tile is icy.
    pub fn predictive(&self) -> f64 {
        match self.posterior() {
            IceRate::Beta { alpha, beta } => alpha / (alpha + beta),
            IceRate::Fixed { q } => q,
        }
    }
}

impl Belief for IceBelief {
    type Aleatoric = IceAssignment;

    fn posterior_update(&mut self, delta: &Evidence) -> Result<()> {
        for (i, v) in delta.iter() {
            if i >= self.length || v > 1 {
                return Err(Error::contract(format!("ice evidence ({i}, {v}) outside the track")));
            }
        }
        let mut merged = self.evidence.clone();
        let fresh = merged.merge(delta)?;
        self.evidence = merged;
        for (_, v) in fresh.iter() {
            if v == 1 {
                self.n_ice += 1;
            } else {
                self.n_dry += 1;
            }
        }
        Ok(())
    }

    fn evidence(&self) -> &Evidence {
        &self.evidence
    }

    fn sample_aleatoric(&self, rng: &mut dyn RngCore) -> IceAssignment {
        let q = match self.posterior() {
            IceRate::Beta { alpha, beta } => Beta::new(alpha, beta).expect("positive Beta parameters").sample(rng),
            IceRate::Fixed { q } => q,
        };
        let tiles = (0..self.length)
            .map(|i| match self.evidence.get(i) {
                Some(v) => v == 1,
                None => rng.random_bool(q),
            })
            .collect();
        IceAssignment { rate: q, tiles }
    }

    fn summary(&self) -> BeliefSummary {
        let params = match self.posterior() {
            IceRate::Beta { alpha, beta } => vec![alpha, beta],
            IceRate::Fixed { q } => vec![q],
        };
        BeliefSummary {
            disclosed: self.evidence.len(),
            positive: self.n_ice,
            negative: self.n_dry,
            params,
        }
    }
}

/// Prior probability that the apple is the correct fruit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FruitPrior {
    pub apple_prob: f64,
}

/// Bernoulli belief over the correct fruit; collapses once disclosed.
#[derive(Clone, Debug, PartialEq)]
pub struct FruitBelief {
    pub prior: FruitPrior,
    evidence: Evidence,
}

impl FruitBelief {
    pub fn new(prior: FruitPrior) -> Self {
        FruitBelief {
            prior,
            evidence: Evidence::new(),
        }
    }

    pub fn disclosed(&self) -> Option<Fruit> {
        self.evidence
            .get(FRUIT_COMPONENT)
            .map(|c| Fruit::from_code(c).expect("validated fruit code"))
    }

    pub fn predictive_apple(&self) -> f64 {
        match self.disclosed() {
            Some(Fruit::Apple) => 1.0,
            Some(Fruit::Banana) => 0.0,
            None => self.prior.apple_prob,
        }
    }
}

impl Belief for FruitBelief {
    type Aleatoric = Fruit;

    fn posterior_update(&mut self, delta: &Evidence) -> Result<()> {
        for (i, v) in delta.iter() {
            if i != FRUIT_COMPONENT {
                return Err(Error::contract(format!("fruit evidence index {i}")));
            }
            Fruit::from_code(v)?;
        }
        let mut merged = self.evidence.clone();
        merged.merge(delta)?;
        self.evidence = merged;
        Ok(())
    }

    fn evidence(&self) -> &Evidence {
        &self.evidence
    }

    fn sample_aleatoric(&self, rng: &mut dyn RngCore) -> Fruit {
        match self.disclosed() {
            Some(f) => f,
            None if rng.random_bool(self.prior.apple_prob) => Fruit::Apple,
            None => Fruit::Banana,
        }
    }

    fn summary(&self) -> BeliefSummary {
        let d = self.disclosed();
        BeliefSummary {
            disclosed: self.evidence.len(),
            positive: (d == Some(Fruit::Apple)) as usize,
            negative: (d == Some(Fruit::Banana)) as usize,
            params: vec![self.predictive_apple()],
        }
    }
}

impl Grounded for IcyTrack {
    type Prior = IceRate;
    type Belief = IceBelief;

    fn belief(&self, prior: &IceRate, level: &IcyTrackLevel) -> IceBelief {
        IceBelief::new(*prior, level.length as usize)
    }
}

impl Grounded for FruitRooms {
    type Prior = FruitPrior;
    type Belief = FruitBelief;

    fn belief(&self, prior: &FruitPrior, _level: &FruitRoomsLevel) -> FruitBelief {
        FruitBelief::new(*prior)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn beta_posterior_counts() {
        let mut b = IceBelief::new(IceRate::Beta { alpha: 1.0, beta: 15.0 }, 12);
        assert_eq!(b.posterior(), IceRate::Beta { alpha: 1.0, beta: 15.0 });
        let ev = Evidence::from_entries([(0, 1), (1, 1), (2, 1), (3, 0), (4, 0), (5, 0), (6, 0), (7, 0)]).unwrap();
        b.posterior_update(&ev).unwrap();
        assert_eq!(b.posterior(), IceRate::Beta { alpha: 4.0, beta: 20.0 });
        // re-sending the same evidence is idempotent
        b.posterior_update(&ev).unwrap();
        assert_eq!((b.n_ice, b.n_dry), (3, 5));
    }

    #[test]
    fn predictive_is_posterior_mean() {
        let mut b = IceBelief::new(IceRate::Beta { alpha: 1.0, beta: 15.0 }, 40);
        let ev = Evidence::from_entries((0..8).map(|i| (i, (i < 2) as u8))).unwrap();
        b.posterior_update(&ev).unwrap();
        assert!((b.predictive() - 3.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn contradictory_evidence_is_rejected() {
        let mut b = IceBelief::new(IceRate::Beta { alpha: 1.0, beta: 15.0 }, 4);
        b.posterior_update(&Evidence::from_entries([(2, 1)]).unwrap()).unwrap();
        let err = b.posterior_update(&Evidence::from_entries([(2, 0)]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::GroundingConsistency { index: 2, .. }));
        assert_eq!(b.n_ice, 1);

        let mut f = FruitBelief::new(FruitPrior { apple_prob: 0.7 });
        f.posterior_update(&Evidence::from_entries([(0, 1)]).unwrap()).unwrap();
        assert!(f.posterior_update(&Evidence::from_entries([(0, 0)]).unwrap()).is_err());
    }

    #[test]
    fn fully_disclosed_track_is_deterministic() {
        let mut b = IceBelief::new(IceRate::Beta { alpha: 1.0, beta: 15.0 }, 3);
        b.posterior_update(&Evidence::from_entries([(0, 1), (1, 0), (2, 1)]).unwrap()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            assert_eq!(b.sample_aleatoric(&mut rng).tiles, vec![true, false, true]);
        }
    }
}
