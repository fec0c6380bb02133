use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Best iterate handed back when the joint estimator runs out of budget.
#[derive(Debug, Clone, PartialEq)]
pub struct BestIterate {
    /// Per-cause values at the distinct observation times.
    pub values: Vec<Vec<f64>>,
    pub total_mass: f64,
    pub fenchel_violation: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("number of causes must be at least 1")]
    NoCauses,
    #[error("row {row}: status {status} out of range 0..={k}")]
    StatusOutOfRange { row: usize, status: i64, k: usize },
    #[error("row {row}: time is not finite")]
    NonFiniteTime { row: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid step function: {0}")]
    InvalidStepFn(String),
    #[error("sum constraint violated at t = {t}: F_+ = {sum}")]
    SumConstraint { t: f64, sum: f64 },
    #[error("system has {got} components, expected {expected}")]
    ComponentCount { got: usize, expected: usize },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("weight at index {index} is not positive")]
    NonPositiveWeight { index: usize },
    #[error("infeasible bounds: lower[{lower_index}] > upper[{upper_index}]")]
    InfeasibleBounds {
        lower_index: usize,
        upper_index: usize,
    },
    #[error("cause index {k} out of range 1..={max}")]
    CauseOutOfRange { k: usize, max: usize },
    #[error("estimate infeasible: zero denominator for {process} at t = {t}")]
    ZeroDenominator { process: String, t: f64 },
    #[error("instance too large for brute force: {dims} free values (max 8)")]
    InstanceTooLarge { dims: usize },
    #[error("no convergence after {iterations} iterations (Fenchel violation {})", best.fenchel_violation)]
    NonConvergence {
        iterations: usize,
        best: Box<BestIterate>,
    },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("observation distribution must have bounded support")]
    UnboundedSupport,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
