use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed input: {0}")]
    MalformedInput(String),

    #[error("decoder stalled: ripple is empty")]
    Stalled,

    #[error("decoder is not in a state that allows this: {0}")]
    InvalidState(&'static str),

    #[error("doping unavailable for source {index}: {reason}")]
    DopingUnavailable { index: usize, reason: String },

    #[error("network exhausted: requested {requested} symbols but only {available} storage nodes exist")]
    ExhaustedNetwork { requested: usize, available: usize },

    #[error("expected-doping iteration did not terminate after {0} rounds")]
    Diverged(usize),
}
