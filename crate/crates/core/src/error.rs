use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A categorical distribution was requested over weights summing to zero.
    #[error("degenerate weights: total weight is zero or not finite")]
    DegenerateWeights,

    #[error("weight collapse at time {t}: every particle has zero likelihood")]
    WeightCollapse { t: usize },

    #[error("degenerate backward weights for particle {particle}: all products weight * density vanish")]
    DegenerateBackwardWeights { particle: usize },

    #[error("no observation bound for time {t}")]
    MissingObservation { t: usize },

    #[error("generation {s} is not retained at time {t} (oldest retained generation is {oldest})")]
    Retention { s: usize, t: usize, oldest: usize },

    #[error("active estimator count exceeded the cap of {cap} at time {t}")]
    ActiveSetOverflow { t: usize, cap: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
