use thiserror::Error;

/// Failures raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("support error: p > 0 where q = 0 at x = {x}")]
    Support { x: f64 },
    #[error("infeasible moments: second moment {second} <= squared first moment {first_sq}")]
    Infeasible { second: f64, first_sq: f64 },
    #[error("dual solver did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },
    #[error("coefficient error: volatility {vol} at x = {x}, t = {t} is not positive")]
    Coefficient { x: f64, t: f64, vol: f64 },
    #[error(
        "boundary truncation: {leaked:e} probability mass reached the domain edge; widen the grid"
    )]
    BoundaryTruncation { leaked: f64 },
    #[error("quadrature truncation: tail mass {tail_mass:e} beyond the integration range")]
    Truncation { tail_mass: f64 },
    #[error("scheme error: {0}")]
    Scheme(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
