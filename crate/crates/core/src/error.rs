use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// Probability mass above the cavity cutoff exceeds the allowed tolerance.
    #[error("truncation leakage {mass:.3e} exceeds tolerance {tolerance:.1e}")]
    Leakage { mass: f64, tolerance: f64 },

    /// An adder channel would push population past the cutoff.
    #[error("top Fock level population {population:.3e} would leak past the cutoff")]
    TruncationLeak { population: f64 },

    #[error("steady state not reached by t = {t_end}: final residual {residual:.3e}")]
    NotConverged { residual: f64, t_end: f64 },

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("{failed} of {total} grid points failed to converge")]
    TooManyFailures { failed: usize, total: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            found,
        }
    }
}
