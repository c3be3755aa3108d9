use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FpcaError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("insufficient sample: need at least {needed} curves, got {got}")]
    InsufficientSample { needed: usize, got: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("surface is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("requested rank {q} outside 1..={max}")]
    InvalidRank { q: usize, max: usize },

    #[error("component {0} has zero spread across pairs")]
    DegenerateComponent(usize),

    #[error("no convergence after {iterations} iterations (last step {last_step:e})")]
    NoConvergence {
        iterations: usize,
        last_step: f64,
        last_iterate: Vec<f64>,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("threshold {threshold} unreachable: retained eigenvalues explain {reached}")]
    UnreachableThreshold { threshold: f64, reached: f64 },

    #[error("smoothing: {0}")]
    Smoothing(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, FpcaError>;
