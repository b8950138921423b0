//! Fisher-Kolmogorov reaction-diffusion dynamics on weighted graphs, with
//! Bayesian calibration of region-wise reaction coefficients and forward
//! uncertainty propagation by Monte Carlo sampling and sparse-grid
//! stochastic collocation.
//!
//! The crate is organized bottom-up:
//!
//! * [`connectome`]: weighted-graph ingestion, validation, graph Laplacian,
//!   scan projection, and a synthetic-network generator.
//! * [`field`]: node fields, region-wise parameter vectors, priors and
//!   posterior summaries.
//! * [`solver`]: Crank-Nicolson time stepping with a second-order
//!   extrapolated semi-implicit reaction term.
//! * [`qoi`]: spatial and volume-weighted regional averages.
//! * [`mcmc`]: Metropolis-Hastings calibration and chain diagnostics.
//! * [`forward_mc`]: deterministic per-sample parameter streams and Monte
//!   Carlo moment estimation.
//! * [`sparse_grid`]: Gauss-Hermite and weighted Leja knots, Smolyak
//!   multi-index sets, combination-technique grids, quadrature and
//!   interpolation.
//! * [`model`]: glue that turns a graph plus a parameter vector into the
//!   quantities of interest consumed by calibration and UQ.

pub mod connectome;
pub mod field;
pub mod forward_mc;
pub mod mcmc;
pub mod model;
pub mod numeric;
pub mod qoi;
pub mod solver;
pub mod sparse_grid;

pub use connectome::{Connectome, Edge, Laplacian, Node, SyntheticConfig};
pub use field::{NodeField, ParameterVector, PosteriorSummary, PriorBounds, RegionTable};
pub use forward_mc::MomentSeries;
pub use mcmc::{Chain, McmcConfig};
pub use model::{CalibrationModel, ForwardModel, ModelError};
pub use qoi::{QoISeries, VolumeNormalization};
pub use solver::{SolverConfig, Trajectory};
pub use sparse_grid::{
    EvalCache, GridConfig, KnotFamily, LevelToKnots, MultiIndexSet, SparseGrid,
};
