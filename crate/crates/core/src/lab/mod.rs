//! Simulation lab: ground-truth models, seeded sampling, the local processes
//! used in rate arguments, minimax constructions and rate experiments.
//!
//! Everything here works in `f64`.

mod minimax;
mod processes;
mod rates;
mod sampling;
mod truth;

pub use minimax::{minimax_bound, minimax_perturbation, two_point_risk, MinimaxBound, PerturbedModel, TwoPointRisk, MINIMAX_D};
pub use processes::{jump_spacing, uniform_rate_statistic, vn_envelope, w_s_processes, JumpSpacing, WsValues};
pub use rates::{rate_experiment, thread_cap, FailureCount, RateConfig, RateRow, RateTable, SlopeEntry};
pub use sampling::{replication_seed, sample_dataset, sample_from_system};
pub use truth::{CauseShape, LocalTruth, ObsDistribution, TruthModel};

use serde::{Deserialize, Serialize};

use crate::estimators::{mle_estimate, naive_estimate, MleOptions};
use crate::model::{Dataset, SubDistSystem};
use crate::Result;

/// Which estimator an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Naive,
    Mle,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Naive => "naive",
            EstimatorKind::Mle => "mle",
        }
    }

    /// Fit and return the estimated system (a cone element for the naive
    /// estimator, whose sum may exceed one).
    pub fn fit(self, d: &Dataset<f64>) -> Result<SubDistSystem<f64>> {
        match self {
            EstimatorKind::Naive => Ok(naive_estimate(d).as_system()),
            EstimatorKind::Mle => Ok(mle_estimate(d, &MleOptions::default())?.system),
        }
    }
}
