//! Nonparametric estimation for current status data with competing risks.
//!
//! The crate computes the joint nonparametric maximum likelihood estimator and
//! the naive (per-cause) estimator of the sub-distribution functions
//! `F_k(t) = P(X <= t, Y = k)`, certifies optimality of the joint estimator
//! through its Fenchel conditions, and ships the Monte Carlo machinery used to
//! study consistency, the cube-root rate of convergence and the local minimax
//! lower bound.
//!
//! The estimation stack ([`model`], [`isotonic`], [`estimators`],
//! [`certification`]) is generic over the floating point type through
//! [`Scalar`]; the Monte Carlo side ([`metrics`], [`lab`]) works in `f64`.
//! Concrete aliases for the common instantiations live at the crate root.

pub mod certification;
pub mod error;
pub mod estimators;
pub mod isotonic;
pub mod lab;
pub mod metrics;
pub mod model;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use certification::{
    beta_stat, cone_loglik, fenchel_check, loglik, vnk, CauseReport, FenchelReport,
};
pub use estimators::{
    brute_force_mle, mle_estimate, naive_estimate, support_sets, uniqueness_report, MassInterval,
    MleAlgorithm, MleOptions, MleResult, NaiveResult, SupportSets, UniquenessReport,
};
pub use isotonic::{gcm_left_slopes, weighted_isotonic, CumSumDiagram};
pub use model::{
    system_sum, validate_dataset, Dataset, Jump, Observation, StepFn, SubDistSystem, SystemSum,
    TimeGroup,
};

pub type StepFnF64 = model::StepFn<f64>;
pub type StepFnF32 = model::StepFn<f32>;
pub type DatasetF64 = model::Dataset<f64>;
pub type DatasetF32 = model::Dataset<f32>;
pub type SubDistSystemF64 = model::SubDistSystem<f64>;
pub type SubDistSystemF32 = model::SubDistSystem<f32>;
pub type MleResultF64 = estimators::MleResult<f64>;
pub type NaiveResultF64 = estimators::NaiveResult<f64>;
pub type FenchelReportF64 = certification::FenchelReport<f64>;
