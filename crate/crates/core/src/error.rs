use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A coefficient or kernel returned a non-finite value.
    #[error("non-finite value from {what} at particle index {index}")]
    Evaluation { what: String, index: usize },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("discretization error: {0}")]
    Discretization(String),

    #[error("spacing error: {0}")]
    Spacing(String),

    /// Non-finite right-hand side during time integration.
    #[error("integration error at t = {time}: particle {particle}, term {term}")]
    Integration {
        time: f64,
        particle: usize,
        term: &'static str,
    },

    /// A runtime invariant monitor aborted the run.
    #[error("monitor abort at t = {time}: {reason}")]
    MonitorAbort { time: f64, reason: String },

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("prediction unavailable: {0}")]
    PredictionUnavailable(String),

    #[error("reference solver failure: {0}")]
    Oracle(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
