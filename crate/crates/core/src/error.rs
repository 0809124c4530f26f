use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A level descriptor violates a structural bound.
    #[error("malformed level: {bound}")]
    Construction { bound: String },

    /// A caller broke an operation precondition (stepping a finished episode,
    /// scoring an empty trajectory, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("decode error: {0}")]
    Decode(String),

    /// An aleatoric assignment or evidence entry disagrees with what the
    /// trajectory already disclosed.
    #[error("grounding consistency: component {index} disclosed as {disclosed}, got {proposed}")]
    GroundingConsistency {
        index: usize,
        disclosed: u8,
        proposed: u8,
    },

    #[error("non-finite {what} at index {index}")]
    Numeric { what: &'static str, index: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("training diverged: loss {loss:e} ({diagnostics})")]
    Divergence { loss: f64, diagnostics: String },

    #[error("state space overflow: more than {limit} states")]
    StateSpaceOverflow { limit: usize },

    #[error("schema error: missing or invalid field `{field}`")]
    Schema { field: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn construction(bound: impl Into<String>) -> Self {
        Error::Construction {
            bound: bound.into(),
        }
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn decode(msg: impl Into<String>) -> Self {
        Error::Decode(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
