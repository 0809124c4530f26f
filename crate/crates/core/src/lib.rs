pub mod curriculum;
pub mod env;
pub mod error;
pub mod grounding;
pub mod harness;
pub mod learner;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision instantiations used by the harness.
pub type Policy = learner::PolicyParams<f64>;
pub type Network = learner::ActorCritic<f64>;
pub type Batch = learner::TrajectoryBatch<f64>;

/// Single-precision instantiations.
pub type Policy32 = learner::PolicyParams<f32>;
pub type Network32 = learner::ActorCritic<f32>;
pub type Batch32 = learner::TrajectoryBatch<f32>;
