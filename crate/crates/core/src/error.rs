use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid motion parameters: {0}")]
    InvalidMotion(String),

    #[error("invalid offspring distribution: {0}")]
    InvalidOffspring(String),

    #[error("heavy-tail family infeasible: {quantity} = {value:.6} lies outside [0, 1]")]
    Infeasible { quantity: &'static str, value: f64 },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("supercritical offspring law (m = {0}) is not supported")]
    Supercritical(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
