use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("enumeration of {count} items exceeds cap {cap}; use Monte Carlo mode")]
    CapExceeded { count: u128, cap: u128 },
    #[error("singular linear system")]
    Singular,
    #[error("step-halving check failed: defect {defect:.3e} exceeds {tol:.1e}")]
    NonConvergence { defect: f64, tol: f64 },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("density became negative ({value:.3e} at atom {atom}, t = {t})")]
    Instability { value: f64, atom: usize, t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
