//! Smolyak sparse-grid stochastic collocation for componentwise Gaussian
//! parameters: 1D knot families, downward-closed multi-index sets with
//! combination coefficients, grid assembly with point deduplication, and
//! surrogate interpolation / quadrature of QoI moments.

mod grid;
mod index;
mod knots;

pub use grid::{
    build_sparse_grid, sc_convergence, sc_moments, EvalCache, GridConfig, ScConvergence,
    ScConvergenceRow, SparseGrid, TensorTerm,
};
pub use index::{random_downward_closed, smolyak_index_set, MultiIndexSet};
pub use knots::{
    gauss_hermite_knots, leja_quadrature_weights, weighted_leja_knots, weighted_leja_sequence,
    KnotFamily, LevelToKnots, MAX_KNOTS,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScError {
    #[error("bad config: {0}")]
    Config(String),
    #[error("requested {requested} knots; interpolatory weights are unreliable beyond {max}")]
    TooManyKnots { requested: usize, max: usize },
    #[error("bad multi-index set: {0}")]
    IndexSet(String),
    #[error("dimension mismatch: {context} expected {expected}, got {got}")]
    Dimension { context: &'static str, expected: usize, got: usize },
    #[error("model evaluation failed at grid point {point} (p = {parameters:?}): {message}")]
    Model { point: usize, parameters: Vec<f64>, message: String },
    #[error("variance estimate {value} at t = {time} is below the quadrature-error allowance")]
    NegativeVariance { value: f64, time: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("io error for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
