//! Weighted least-squares monotone regression on boxes.
//!
//! The library fits the closest monotone function to given data in a weighted
//! L² sense, where "monotone" means increasing or decreasing along each axis
//! as prescribed by a per-axis [`Signature`](order::Signature). The discrete
//! core solves the problem exactly on rectangular grids and certifies its
//! output against the optimality conditions; on top of that sit cell-averaging
//! operators, dyadic refinement with error bounds, pointwise evaluation of the
//! continuous fit, and a generalization of the distance to Bregman divergences.
//!
//! Entry points:
//! - [`isotonic::solve`] fits grid data and returns fitted values, level
//!   blocks, the objective, and an optimality certificate.
//! - [`projection::project_grid_constant`] projects a cell-constant function
//!   of a box, [`projection::approximate_projection`] drives dyadic refinement
//!   toward a target accuracy with certified error bounds.
//! - [`averaging`] exposes the min-max averaging formulas and the pointwise
//!   evaluator built on them.
//! - [`generalized`] verifies that the least-squares fit also minimizes
//!   separable Bregman objectives.
//! - [`sampling`] draws random monotone test functions.

pub mod averaging;
pub mod error;
pub mod generalized;
pub mod grid;
pub mod io;
pub mod isotonic;
mod lattice;
pub mod order;
pub mod projection;
mod quad;
pub mod sampling;

pub use averaging::{
    pointwise_value, region_mean, univariate_value, volume_weighted_fit, volume_weighted_value,
    PointwiseOptions, PointwiseReport, PointwiseStep, RegionMeans,
};
pub use error::{Error, Result};
pub use generalized::{
    bregman, level_set_report, orthogonality_check, verify_minimizer, BlockRow, BregmanSpec,
    Interval, LevelSetReport, MinimizerReport,
};
pub use grid::{
    cell_average, common_refinement, grid_around_point, lift, norms, sample_midpoints, Cuboid,
    GridFunction, GridSpec, Norms, Regularity, ScalarField,
};
pub use isotonic::{
    certify, certify_fitted, minmax_oracle, solve, solve_with, Block, Certificate, CertifyRoute,
    Engine,
    SolveResult,
};
pub use order::{
    covering_pairs, enumerate_lower_sets, enumerate_upper_sets, is_monotone, leq_sigma, IndexSet,
    SetKind, Signature, DEFAULT_ENUMERATION_CAP,
};
pub use projection::{
    approximate_projection, error_bound, error_bound_factor, project_grid_constant,
    ConvergenceReport, Discretization, LevelRecord, NormKind, RefineOptions,
};
pub use sampling::{monotone_candidates, random_monotone};
