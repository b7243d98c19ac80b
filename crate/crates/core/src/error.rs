use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Probability mass beyond the truncation level exceeds the tolerance.
    #[error("truncation: tail mass {tail:.3e} beyond n_max={n_max} exceeds tolerance {tol:.1e}")]
    Truncation { n_max: usize, tail: f64, tol: f64 },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("undefined input: {0}")]
    Undefined(&'static str),

    /// The analytic model produced a value that cannot be a probability or a
    /// density operator; usually a parameter regime outside its validity.
    #[error("model inconsistency: {0}")]
    ModelInconsistency(String),

    #[error("rank deficient tomography record: {0}")]
    RankDeficient(String),

    #[error("no convergence after {iterations} iterations (gradient norm {gradient_norm:.3e}, log-likelihood {log_likelihood:.6})")]
    NoConvergence {
        iterations: usize,
        gradient_norm: f64,
        log_likelihood: f64,
    },

    #[error("target guessing probability {target} unattainable (maximum {max})")]
    UnattainableTarget { target: f64, max: f64 },

    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must lie in [0, 1]",
        })
    }
}

pub(crate) fn check_nonneg(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and non-negative",
        })
    }
}
