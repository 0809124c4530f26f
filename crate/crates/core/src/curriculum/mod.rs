//! Level curricula: regret scoring, the top-K replay buffer and the
//! replay-or-explore episode sampler.

pub mod audit;
pub mod buffer;
pub mod sampler;
pub mod score;

pub use audit::{AuditEvent, AuditLog};
pub use buffer::{BufferOutcome, LevelBuffer, Prioritization, Replay, ReplayConfig};
pub use sampler::{plr_episode, EpisodeMode};
pub use score::{score_deltas, score_trajectory, Scorer};
