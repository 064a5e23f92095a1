use thiserror::Error;

/// Errors raised by the numerical routines and simulators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The loss is +inf because some coverage or confidence is exactly zero.
    ///
    /// Kept separate from numeric overflow so callers can tell the two apart.
    #[error("infinite loss: {0}")]
    InfiniteLoss(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    /// The operation was called with an argument kind it does not accept.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A query admitted no solution where one is guaranteed to exist.
    #[error("infeasible query: {0}")]
    Infeasible(String),

    /// Training produced a non-finite parameter.
    #[error("numeric divergence: {0}")]
    Divergence(String),

    #[error("compute guard: {0}")]
    Guard(String),

    #[error("invalid environment: {0}")]
    InvalidEnv(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("{name} = {p} is not in [0, 1]")));
    }
    Ok(())
}

pub(crate) fn check_budget(n: u64) -> Result<()> {
    if n == 0 {
        return Err(domain("sample budget N must be at least 1"));
    }
    Ok(())
}
