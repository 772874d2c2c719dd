use thiserror::Error;

/// Everything that can go wrong while validating inputs, evaluating a closed
/// form or running an estimator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{field} must be positive")]
    NonPositive { field: &'static str },

    #[error("{field} must be non-negative")]
    NegativeRate { field: &'static str },

    #[error("{field} must be finite")]
    NotFinite { field: &'static str },

    #[error("argument {0} is outside the open interval (0, 1)")]
    OutOfDomain(f64),

    #[error("exponent {exponent} exceeds the double-precision range")]
    Overflow { exponent: f64 },

    #[error("sample index {index} times {n_steps} steps exceeds 2^63 - 1")]
    IndexOverflow { index: u64, n_steps: u64 },

    #[error("sample count must be at least 2, got {0}")]
    BadSampleCount(u64),

    #[error("worker count must be at least 1")]
    BadWorkerCount,

    #[error("unknown trader `{0}`")]
    UnknownTrader(String),

    #[error("estimate has zero standard error and mean {mean} differs from reference {reference}")]
    DegenerateEstimate { mean: f64, reference: f64 },

    #[error("allocation {bond} + {stock} does not add up to total wealth {total}")]
    AllocationMismatch { bond: f64, stock: f64, total: f64 },

    #[error("brownian draw has no increments")]
    MissingIncrements,

    #[error("unknown sweep field `{0}` (expected rho, mu, sigma or T)")]
    UnknownField(String),

    #[error("n_steps must be at least 1")]
    BadStepCount,

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
