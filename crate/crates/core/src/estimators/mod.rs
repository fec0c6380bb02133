//! The naive estimator, the joint maximum likelihood estimator, support and
//! uniqueness reporting, and a brute-force oracle for tiny instances.

mod brute;
mod mle;
mod naive;
mod support;

pub use brute::brute_force_mle;
pub use mle::{mle_estimate, MleAlgorithm, MleOptions, MleResult};
pub use naive::{naive_estimate, NaiveResult};
pub use support::{support_sets, uniqueness_report, MassInterval, SupportSets, UniquenessReport};
