use thiserror::Error;

/// Error variants shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("argument {name} = {value} outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    /// The root-finding bracket did not contain a sign change.
    #[error("no sign change of the residual on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    /// Adaptive quadrature could not reach the requested tolerance.
    #[error("quadrature failed to reach tolerance {tol:e} (error estimate {estimate:e})")]
    Quadrature { tol: f64, estimate: f64 },

    /// Rejection sampler acceptance rate collapsed, which indicates a density bug.
    #[error("rejection acceptance rate {rate:e} below 1e-4 after {proposals} proposals")]
    RejectionStall { rate: f64, proposals: u64 },

    /// An operation was asked to work on an empty point cloud.
    #[error("point cloud is empty")]
    EmptyCloud,

    /// A piecewise-constant marginal table failed validation.
    #[error("invalid marginal table: {0}")]
    InvalidTable(String),

    /// A cost profile failed its admissibility checks.
    #[error("cost profile rejected: {0}")]
    InvalidCost(String),

    /// A triple partition violated the per-axis multiset invariant.
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    /// Exhaustive enumeration was requested beyond its size budget.
    #[error("brute force enumeration is limited to n <= {limit}, got n = {requested}")]
    SizeLimit { requested: usize, limit: usize },

    /// Integer rounding could not satisfy a fiber-sum constraint.
    #[error("fiber repair failed on axis {axis}, fiber {index}: sum {got} != {want}")]
    FiberRepair {
        axis: usize,
        index: usize,
        got: i64,
        want: i64,
    },

    /// Two sequences that must have equal lengths do not.
    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    /// Triangle coordinates do not satisfy u + v + w = 2.
    #[error("barycentric constraint violated: |u + v + w - 2| = {0:e}")]
    BarycentricConstraint(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
