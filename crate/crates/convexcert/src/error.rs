//! Crate-wide error type.

use crate::gd::GdTrace;
use crate::linalg::Vector;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid vector: {0}")]
    InvalidVector(String),

    #[error("invalid sample cloud: {0}")]
    InvalidCloud(String),

    #[error("sampling exhausted after {attempts} consecutive rejected pairs")]
    SamplingExhausted { attempts: usize },

    #[error("non-finite evaluation of {what} at {point:?}")]
    NonFiniteEvaluation { what: String, point: Vector },

    #[error("invalid objective: {0}")]
    InvalidObjective(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("degenerate reference: Bregman denominator {value:e} is below 1e-14")]
    DegenerateReference { value: f64 },

    #[error("conjugate of `{name}` is ill-posed: a strongly convex objective is required")]
    IllPosedConjugate { name: String },

    #[error(
        "conjugate solver stopped at residual {residual:e} (> tolerance {tol:e}) after {iters} iterations"
    )]
    NonConvergence {
        tol: f64,
        residual: f64,
        iters: usize,
        best: Box<Vector>,
    },

    #[error("condition {condition} requires the constant `{name}`")]
    MissingConstant {
        condition: &'static str,
        name: &'static str,
    },

    #[error("interpolation condition is undefined for L <= mu (got mu = {mu}, L = {l})")]
    DegenerateInterpolation { mu: f64, l: f64 },

    #[error("inconsistent optimum: f({point:?}) = {value} lies below the supplied optimal value {f_bar}")]
    InconsistentOptimum {
        point: Vector,
        value: f64,
        f_bar: f64,
    },

    #[error("divergence detected at iteration {iteration} (value {value:e})")]
    Divergence {
        iteration: usize,
        value: f64,
        partial: Box<GdTrace>,
    },

    #[error("invalid constants: {0}")]
    InvalidConstants(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
