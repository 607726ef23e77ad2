use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("not a probability vector: {0}")]
    InvalidMeasure(String),

    #[error("measure lacks full support (min weight {min_weight:e})")]
    NotFullSupport { min_weight: f64 },

    #[error("time {time} outside [{lo}, {hi}]")]
    TimeOutOfRange { time: usize, lo: usize, hi: usize },

    #[error("invalid game specification: {0}")]
    InvalidSpec(String),

    #[error("size guard exceeded: {what} needs about {estimate:.3e}, limit {limit:.3e}")]
    SizeGuard {
        what: String,
        estimate: f64,
        limit: f64,
    },

    #[error("operation requires state-dependent coefficients: {0}")]
    PathDependent(&'static str),

    #[error("stability condition violated: dt = {dt:e} exceeds {max_dt:e}; try dt <= {max_dt:e}")]
    Unstable { dt: f64, max_dt: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("scenario error: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn guard(what: impl Into<String>, estimate: f64, limit: f64) -> Result<()> {
    if estimate > limit {
        Err(Error::SizeGuard {
            what: what.into(),
            estimate,
            limit,
        })
    } else {
        Ok(())
    }
}
