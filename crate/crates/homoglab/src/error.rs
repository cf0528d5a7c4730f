//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({0}, {1}) lies outside the closure of the domain")]
    OutsideDomain(f64, f64),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("coefficient error: {0}")]
    Coefficient(String),

    #[error("mesh/lattice alignment error: {0}")]
    Alignment(String),

    #[error("input mismatch: {0}")]
    Input(String),

    #[error("solver did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    SolverDiverged { residual: f64, iterations: usize },

    #[error("study error: {0}")]
    Study(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
