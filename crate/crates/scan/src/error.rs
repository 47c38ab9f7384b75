use nanosqueeze_core::Error as CoreError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Run-level failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum ScanError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl ScanError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            Self::Numerical(_) => 2,
            Self::Io(_) => 3,
        }
    }
}

impl From<std::io::Error> for ScanError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

/// Per-point failure recorded in the error-code column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointError {
    /// Inside the sphere or on the emitter; not a failure.
    Masked,
    Convergence,
    Quadrature,
    Overflow,
    Domain,
    Invalid,
}

impl PointError {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Masked => "masked",
            Self::Convergence => "convergence",
            Self::Quadrature => "quadrature",
            Self::Overflow => "overflow",
            Self::Domain => "domain",
            Self::Invalid => "invalid",
        }
    }

    pub fn is_failure(self) -> bool {
        self != Self::Masked
    }
}

impl From<&CoreError> for PointError {
    fn from(e: &CoreError) -> Self {
        match e {
            CoreError::Convergence(_) | CoreError::OrderTooLarge { .. } => Self::Convergence,
            CoreError::Quadrature(_) => Self::Quadrature,
            CoreError::Overflow(_) => Self::Overflow,
            CoreError::Domain(_) | CoreError::Singularity(_) => Self::Domain,
            _ => Self::Invalid,
        }
    }
}
