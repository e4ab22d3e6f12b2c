use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not symplectic: max |S^T J S - J| = {deviation:e} exceeds tolerance {tol:e}")]
    NotSymplectic { deviation: f64, tol: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Lattice enumeration visited more nodes than allowed.
    #[error("closest-vector search exceeded its budget of {budget} candidates")]
    SearchBudgetExceeded { budget: u64 },

    /// Brute-force grid larger than allowed.
    #[error("brute-force grid of {points} points exceeds the budget of {budget}")]
    BudgetExceeded { points: u128, budget: u128 },

    #[error("trial {trial}: {source}")]
    Trial {
        trial: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("too many decoder budget failures: {failures} of {trials} trials (first at trial {first_trial})")]
    TrialFailureRate {
        failures: u64,
        trials: u64,
        first_trial: u64,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, found: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            found,
        }
    }

    /// True if this error (or the error it wraps) is a search-budget exhaustion.
    pub fn is_budget(&self) -> bool {
        match self {
            Error::SearchBudgetExceeded { .. } | Error::TrialFailureRate { .. } => true,
            Error::Trial { source, .. } => source.is_budget(),
            _ => false,
        }
    }
}
