use thiserror::Error;

/// Errors raised by the link models, solvers and simulators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid modulation format `{0}`")]
    InvalidFormat(String),

    #[error("bit sequence of length {len} is not a multiple of {granularity}")]
    BitLength { len: usize, granularity: usize },

    #[error("frame has {got} slots, format expects {expected}")]
    FrameShape { expected: usize, got: usize },

    #[error("quadrature did not converge: estimate {estimate:e}, error bound {error:e} after {intervals} intervals")]
    QuadratureFailed {
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    #[error("target BER {target:e} unreachable within the search bracket ({reason})")]
    UnreachableTarget { target: f64, reason: String },

    #[error("no crossover between `{a}` and `{b}` within the search bracket")]
    NoCrossover { a: String, b: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
