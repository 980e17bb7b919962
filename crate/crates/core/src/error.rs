use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("length mismatch: expected {expected} samples, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("grid needs at least 2 cells, got {0}")]
    GridTooSmall(usize),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular mass matrix: {0}")]
    Singular(&'static str),

    #[error("power iteration did not converge after {iterations} iterations (last estimate {last_estimate})")]
    NoConvergence { iterations: usize, last_estimate: f64 },

    #[error("time step {dt} exceeds the stable limit; use dt <= {suggested}")]
    StepTooLarge { dt: f64, suggested: f64 },

    #[error("simulation blew up at step {step} (|state| > {limit:e})")]
    BlowUp { step: usize, limit: f64 },

    #[error("trajectory too short: need at least {needed} samples, got {got}")]
    TrajectoryTooShort { needed: usize, got: usize },

    #[error("state has no controller variable")]
    MissingController,

    #[error("target profile violates G v* + di*/dz = 0 (residual {0:e})")]
    TargetNotEquilibrium(f64),

    #[error("boundary mode mismatch: {0}")]
    ModeMismatch(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
