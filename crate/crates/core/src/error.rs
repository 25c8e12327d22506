use thiserror::Error;

/// Errors raised by the flow-matching library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("batch size mismatch: {left} vs {right}")]
    BatchSizeMismatch { left: usize, right: usize },

    #[error("time {0} outside [0, 1]")]
    TimeOutOfRange(f64),

    #[error("frequency {0} outside the admissible range (0, pi)")]
    FrequencyOutOfRange(f64),

    #[error("frame is not orthogonal (max deviation {0:e})")]
    NonOrthogonalFrame(f64),

    #[error("degenerate covariance: eigenvalue {eigenvalue:e} below 1e-12 of the trace {trace:e}")]
    DegenerateCovariance { eigenvalue: f64, trace: f64 },

    #[error("not enough points: need at least {needed}, got {got}")]
    NotEnoughPoints { needed: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("adaptive step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("training diverged at step {step}: loss = {loss}")]
    Diverged { step: usize, loss: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
