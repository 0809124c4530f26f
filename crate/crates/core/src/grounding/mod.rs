//! Posterior beliefs over aleatoric parameters, naive grounding and
//! fictitious transitions.

pub mod belief;
pub mod estimator;
pub mod fictitious;

pub use belief::{Belief, BeliefSummary, FruitBelief, FruitPrior, Grounded, IceBelief};
pub use estimator::{FruitFrequency, IceRateMoments};
pub use fictitious::{fictitious_step, naive_ground, transition_snapshots, FictitiousTransition};
