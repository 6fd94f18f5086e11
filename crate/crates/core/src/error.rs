use thiserror::Error;

/// Errors raised by estimation, testing and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("singular local design at x = {x} (condition number {condition:.3e})")]
    SingularDesign { x: f64, condition: f64 },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("scale estimate {value} is not positive at x = {x}")]
    ScaleDegenerate { x: f64, value: f64 },

    #[error("trim interval empty: no covariates in ({lo}, {hi}]")]
    TrimEmpty { lo: f64, hi: f64 },

    #[error("bootstrap unstable: {failed} of {total} replications failed")]
    BootstrapUnstable { failed: usize, total: usize },

    #[error("unsupported derivative order {0} (expected 0, 1 or 2)")]
    UnsupportedDerivative(u32),

    #[error("point {x} lies outside the curve domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
