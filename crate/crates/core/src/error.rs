use thiserror::Error;

/// Errors reported by the library. Checks that are diagnostics rather than
/// preconditions (optimality certificates, convergence targets) do not error;
/// they return reports with pass/fail flags instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("signature entry {value} on axis {axis} must be -1, 0, or +1")]
    InvalidSignature { axis: usize, value: i32 },

    #[error("invalid box: lo must be strictly below hi on every axis")]
    InvalidBox,

    #[error("breakpoints on axis {axis} must be strictly increasing and span the box")]
    InvalidBreakpoints { axis: usize },

    #[error("point lies outside the box on axis {axis}: {coordinate}")]
    OutsideDomain { axis: usize, coordinate: f64 },

    #[error("grid functions live on different grids")]
    GridMismatch,

    #[error("operation requires an equidistant grid")]
    NotEquidistant,

    #[error("grids admit no common refinement (need equal boxes and dyadic levels)")]
    NoCommonRefinement,

    #[error("weight at flat index {index} is {value}; weights must be finite and > 0")]
    InvalidWeight { index: usize, value: f64 },

    #[error("value at flat index {index} is {value}; values must be finite")]
    NonFiniteValue { index: usize, value: f64 },

    #[error("{points} points require {candidates} candidate subsets, over the cap {cap}")]
    EnumerationCap { points: usize, candidates: u128, cap: u64 },

    #[error("value {value} outside the domain of convexity spec `{spec}`")]
    BregmanDomain { spec: String, value: f64 },

    #[error("pointwise evaluation did not converge: last two values {prev} and {last}")]
    PointwiseNoConvergence { prev: f64, last: f64 },

    #[error("csv line {line}: {msg}")]
    CsvFormat { line: usize, msg: String },

    #[error("{0}")]
    InvalidInput(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
