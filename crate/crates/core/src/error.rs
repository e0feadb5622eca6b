use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("{0} is not available for this objective")]
    Unsupported(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("descent oracle broke its contract: f(G(x)) - f(x) exceeds -c|grad f(x)|^2 by {excess:e}")]
    OracleViolation { excess: f64 },
    #[error("{solver} did not converge within {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("missing minimizer: {0}")]
    MissingSolution(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
