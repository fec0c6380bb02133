use serde::{Deserialize, Serialize};

use super::{replication_seed, sample_dataset, sample_from_system, EstimatorKind, LocalTruth, TruthModel};
use crate::model::{StepFn, SubDistSystem};
use crate::{Error, Result};

/// `2^{-5/3} e^{-1/3}`.
pub const MINIMAX_D: f64 = 0.225_693_220_275_169_5;

/// The truth with cause `k` flattened on both halves of
/// `[t0 - c n^{-1/3}, t0 + c n^{-1/3})`: left of `t0` it takes the value at
/// the left edge, right of `t0` the value at the right edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedModel {
    base: TruthModel,
    k: usize,
    points: [f64; 3],
    levels: [f64; 2],
}

impl PerturbedModel {
    pub fn base(&self) -> &TruthModel {
        &self.base
    }

    pub fn cause(&self) -> usize {
        self.k
    }

    /// Window edges and `t0`.
    pub fn window_points(&self) -> &[f64; 3] {
        &self.points
    }

    pub fn eval(&self, k: usize, t: f64) -> f64 {
        let [lo, t0, hi] = self.points;
        if k != self.k || t < lo || t >= hi {
            self.base.f0k(k, t)
        } else if t < t0 {
            self.levels[0]
        } else {
            self.levels[1]
        }
    }

    /// Step-function version on `grid` plus the window points, validated as a
    /// sub-distribution system.
    pub fn discretize(&self, grid: &[f64]) -> Result<SubDistSystem<f64>> {
        let mut pts: Vec<f64> = grid.iter().chain(self.points.iter()).copied().collect();
        pts.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
        pts.dedup();
        let comps = (1..=self.base.k)
            .map(|k| {
                let vals: Vec<f64> = pts.iter().map(|&t| self.eval(k, t)).collect();
                StepFn::from_values(&pts, &vals, 0.0)
            })
            .collect::<Result<Vec<_>>>()?;
        SubDistSystem::new(comps)
    }
}

pub fn minimax_perturbation(tm: &TruthModel, k: usize, c: f64, n: usize, t0: f64) -> Result<PerturbedModel> {
    tm.validate()?;
    if k == 0 || k > tm.k {
        return Err(Error::CauseOutOfRange { k, max: tm.k });
    }
    if !(c > 0.0) || n == 0 {
        return Err(Error::InvalidModel("need c > 0 and n >= 1".into()));
    }
    tm.local(t0)?;
    let h = c * (n as f64).powf(-1.0 / 3.0);
    let (lo, hi) = (t0 - h, t0 + h);
    let (a, b) = tm.obs.support();
    if lo < a || hi > b {
        return Err(Error::InvalidModel(format!(
            "window [{lo}, {hi}] leaves the observation support [{a}, {b}]"
        )));
    }
    Ok(PerturbedModel {
        base: tm.clone(),
        k,
        points: [lo, t0, hi],
        levels: [tm.f0k(k, lo), tm.f0k(k, hi)],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimaxBound {
    pub d: f64,
    pub bound: f64,
    /// Same expression with `1 - F_0k(t0)` in place of `1 - F_0+(t0)`, as if
    /// cause `k` were the only risk.
    pub single_risk_bound: f64,
}

/// `d^r [ (g / f_0k) (1/F_0k + 1/(1 - F_0+)) ]^{-r/3}` at `t0`.
pub fn minimax_bound(lt: &LocalTruth, k: usize, r: u32) -> Result<MinimaxBound> {
    if k == 0 || k > lt.k() {
        return Err(Error::CauseOutOfRange { k, max: lt.k() });
    }
    if r == 0 {
        return Err(Error::InvalidModel("r must be at least 1".into()));
    }
    let (f, dens) = (lt.f0k_at_t0[k - 1], lt.density_at_t0[k - 1]);
    let ratio = lt.g_at_t0 / dens;
    let r = f64::from(r);
    let expr = |rest: f64| MINIMAX_D.powf(r) * (ratio * (1.0 / f + 1.0 / rest)).powf(-r / 3.0);
    Ok(MinimaxBound {
        d: MINIMAX_D,
        bound: expr(1.0 - lt.f0plus_at_t0),
        single_risk_bound: expr(1.0 - f),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointRisk {
    pub risk_at_f0: f64,
    pub risk_at_fnk: f64,
    pub max_risk: f64,
    /// `n^{r/3} * max_risk`.
    pub scaled_max_risk: f64,
    pub bound: f64,
}

/// Monte Carlo risks `E|F_k-hat(t0) - F_k(t0)|^r` under the truth and under its
/// perturbation, with paired seeds.
#[allow(clippy::too_many_arguments)]
pub fn two_point_risk(
    tm: &TruthModel,
    k: usize,
    c: f64,
    n: usize,
    t0: f64,
    reps: usize,
    seed: u64,
    estimator: EstimatorKind,
    r: u32,
) -> Result<TwoPointRisk> {
    if reps == 0 {
        return Err(Error::InvalidModel("reps must be at least 1".into()));
    }
    let pert = minimax_perturbation(tm, k, c, n, t0)?;
    let bound = minimax_bound(&tm.local(t0)?, k, r)?.bound;
    let (target0, target1) = (tm.f0k(k, t0), pert.eval(k, t0));
    let (mut risk0, mut risk1) = (0.0, 0.0);
    for rep in 0..reps {
        let s = replication_seed(seed, rep as u64);
        let d0 = sample_dataset(tm, n, s)?;
        let d1 = sample_from_system(&pert, &tm.obs, n, s)?;
        let u0 = estimator.fit(&d0)?.component(k).eval(t0);
        let u1 = estimator.fit(&d1)?.component(k).eval(t0);
        risk0 += (u0 - target0).abs().powi(r as i32);
        risk1 += (u1 - target1).abs().powi(r as i32);
    }
    let (risk_at_f0, risk_at_fnk) = (risk0 / reps as f64, risk1 / reps as f64);
    let max_risk = risk_at_f0.max(risk_at_fnk);
    Ok(TwoPointRisk {
        risk_at_f0,
        risk_at_fnk,
        max_risk,
        scaled_max_risk: (n as f64).powf(f64::from(r) / 3.0) * max_risk,
        bound,
    })
}
