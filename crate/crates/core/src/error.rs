use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("reservoir windows of size K = {k} need N >= {min}, got N = {n}")]
    OverlappingWindows { n: usize, k: usize, min: usize },

    #[error("chain absorbed at t_micro = {t_micro} (total rate is zero)")]
    Absorbed { t_micro: f64 },

    #[error("value {value} outside [0, 1]")]
    Domain { value: f64 },

    #[error("assumption not satisfied: {0}")]
    Assumption(String),

    #[error("{what} did not converge after {iterations} iterations (last change {last_change:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        last_change: f64,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("state space of {sites} sites exceeds the oracle cap of {cap}")]
    StateSpaceTooLarge { sites: usize, cap: usize },

    #[error("negative probability {value:e} at state {state}")]
    NegativeProbability { state: usize, value: f64 },

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
