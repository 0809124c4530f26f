pub mod config;
pub mod stats;
pub mod oracle;
pub mod domain;
pub mod rollout;
pub mod eval;
pub mod metrics;
pub mod plots;
pub mod trainer;

pub use domain::Domain;
pub use trainer::{run_experiment, RunSummary, UpdateRecord};
