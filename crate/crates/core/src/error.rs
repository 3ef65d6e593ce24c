use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range for ambient dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "scenario mismatch: expected (n={expected_n}, m={expected_m}), got (n={got_n}, m={got_m})"
    )]
    ScenarioMismatch {
        expected_n: usize,
        expected_m: usize,
        got_n: usize,
        got_m: usize,
    },

    #[error("invalid behaviour: {0}")]
    InvalidBehavior(String),

    #[error("incomplete correlator table, missing keys: {}", .0.join(", "))]
    IncompleteTable(Vec<String>),

    #[error("numerical rank instability: singular-value gap {gap:.3e} below safety margin")]
    RankInstability { gap: f64 },

    #[error("ill-conditioned Gram matrix (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("no convergence after {iterations} iterations (last gap {gap:.3e})")]
    NoConvergence { iterations: usize, gap: f64 },

    #[error(
        "maximum-likelihood estimate did not converge after {iterations} iterations \
         (objective {objective:.12e}, projected-gradient norm {gradient_norm:.3e})"
    )]
    MlNoConvergence {
        iterations: usize,
        objective: f64,
        gradient_norm: f64,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate entry for key {0}")]
    DuplicateKey(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that report a failure of an iterative solver rather
    /// than invalid input.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. } | Error::MlNoConvergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
