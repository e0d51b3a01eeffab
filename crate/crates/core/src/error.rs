use thiserror::Error;

/// Errors raised by the DTHP library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid exciting function: {0}")]
    InvalidKernel(String),

    #[error("lag must be at least 1 (the base rate is not a lag weight)")]
    ZeroLag,

    #[error("horizon {got} is too short (need at least {min})")]
    HorizonTooShort { got: usize, min: usize },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("budget exceeded: {what} requires {requested}, cap is {cap}")]
    BudgetExceeded {
        what: &'static str,
        requested: u64,
        cap: u64,
    },

    #[error("intensity {value} left (0, 1) at step {step}")]
    IntensityOutOfRange { step: usize, value: f64 },

    #[error("input is not convex: second difference {second_difference:e} at grid index {index}")]
    NotConvex {
        index: usize,
        second_difference: f64,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
