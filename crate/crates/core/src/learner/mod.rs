//! Actor-critic learner: network, optimizer, advantage estimation and the
//! clipped-surrogate update.

pub mod adam;
pub mod advantage;
pub mod batch;
pub mod checkpoint;
pub mod network;
pub mod ppo;

pub use adam::Adam;
pub use advantage::{gae, td_errors};
pub use batch::{Step, TrajectoryBatch};
pub use network::{ActorCritic, Forward, Shape};
pub use ppo::{ppo_update, LossCoefs, PolicyParams, PpoConfig, UpdateStats};
