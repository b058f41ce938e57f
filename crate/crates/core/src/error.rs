use thiserror::Error;

use crate::model::CallId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid node pair ({u}, {v}) for n = {n}")]
    InvalidPair { u: u32, v: u32, n: u32 },

    #[error("admission rejected: no free capacity on edge {edge}")]
    CapacityExceeded { edge: u32 },

    #[error("malformed route: {0}")]
    MalformedRoute(String),

    #[error("unknown or inactive call {0}")]
    UnknownCall(CallId),

    #[error("event queue is empty")]
    EmptyQueue,

    #[error("state space exceeds bound of {bound} states")]
    StateSpaceExceeded { bound: usize },

    #[error("stationary solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("out of domain: {0}")]
    OutOfDomain(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
