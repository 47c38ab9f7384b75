use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid material model: {0}")]
    InvalidModel(String),
    #[error("invalid permittivity table: {0}")]
    InvalidTable(String),
    #[error("argument outside domain: {0}")]
    Domain(String),
    #[error("singular argument: {0}")]
    Singularity(String),
    #[error("order {order} exceeds the supported maximum {max}")]
    OrderTooLarge { order: usize, max: usize },
    #[error("special function overflow: {0}")]
    Overflow(String),
    #[error("series did not converge: {0}")]
    Convergence(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("fit failed: relative residual {residual:.3e} exceeds {threshold:.3e}")]
    FitFailure { residual: f64, threshold: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
