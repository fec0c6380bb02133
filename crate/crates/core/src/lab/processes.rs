use serde::{Deserialize, Serialize};

use super::{LocalTruth, TruthModel};
use crate::model::{Dataset, StepFn, SubDistSystem};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WsValues {
    /// `W_nk(t)` for `k = 1..=K`.
    pub w: Vec<f64>,
    /// `W_n+(t) = sum_k W_nk(t)`.
    pub w_plus: f64,
    /// `S_nk(t) = a_k W_nk(t) + a_{K+1} W_n+(t)`.
    pub s: Vec<f64>,
}

/// `W_nk(t) = (1/n) sum_{T_i <= t} (delta_ik - F_0k(T_i))` and the weighted
/// combinations `S_nk`.
pub fn w_s_processes(d: &Dataset<f64>, tm: &TruthModel, lt: &LocalTruth, t: f64) -> Result<WsValues> {
    let k = d.k();
    if tm.k != k || lt.k() != k {
        return Err(Error::ComponentCount {
            got: lt.k(),
            expected: k,
        });
    }
    let n = d.n() as f64;
    let mut w = vec![0.0; k];
    for g in d.distinct().iter().take_while(|g| g.time <= t) {
        let total = g.total() as f64;
        for (c, wc) in w.iter_mut().enumerate() {
            *wc += (g.counts[c + 1] as f64 - total * tm.f0k(c + 1, g.time)) / n;
        }
    }
    let w_plus: f64 = w.iter().sum();
    let s = w.iter().zip(&lt.a).map(|(wk, ak)| ak * wk + lt.a[k] * w_plus).collect();
    Ok(WsValues { w, w_plus, s })
}

/// `n^{-1/3}` inside `|t| <= n^{-1/3}`, `n^{-(1 - beta)/3} |t|^beta` outside.
pub fn vn_envelope(n: usize, t: f64, beta: f64) -> f64 {
    let n = n as f64;
    let inner = n.powf(-1.0 / 3.0);
    if t.abs() <= inner {
        inner
    } else {
        n.powf(-(1.0 - beta) / 3.0) * t.abs().powf(beta)
    }
}

/// `sup_{|t - t0| <= r} |F_+(t) - F_0+(t)| / v_n(t - t0)`, evaluated at both
/// one-sided limits of every jump of the estimate in the window and at 512
/// uniform grid points.
pub fn uniform_rate_statistic(est: &SubDistSystem<f64>, tm: &TruthModel, t0: f64, r: f64, n: usize, beta: f64) -> f64 {
    let (lo, hi) = (t0 - r, t0 + r);
    let ratio = |t: f64, value: f64| (value - tm.f0_plus(t)).abs() / vn_envelope(n, t - t0, beta);
    let plus = |t: f64| est.components().iter().map(|c| c.eval(t)).sum::<f64>();
    let plus_left = |t: f64| est.components().iter().map(|c| c.left_limit(t)).sum::<f64>();
    let mut sup = 0.0f64;
    for t in est.merged_jump_points().into_iter().filter(|&t| t >= lo && t <= hi) {
        sup = sup.max(ratio(t, plus(t))).max(ratio(t, plus_left(t)));
    }
    for i in 0..512 {
        let t = lo + (hi - lo) * i as f64 / 511.0;
        sup = sup.max(ratio(t, plus(t)));
    }
    sup
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpSpacing {
    /// Largest jump point `<= s`, or the lower support edge.
    pub lower: f64,
    /// Smallest jump point `> s`, or the upper support edge.
    pub upper: f64,
    pub spacing: f64,
    /// True if either side fell back to a support edge.
    pub flagged: bool,
}

/// Distance between the jump points of `f` that bracket `s`.
pub fn jump_spacing(f: &StepFn<f64>, s: f64, support: (f64, f64)) -> JumpSpacing {
    let mut lower = None;
    let mut upper = None;
    for (t, inc) in f.increments() {
        if !(inc > 0.0) || !t.is_finite() {
            continue;
        }
        if t <= s {
            lower = Some(t);
        } else if upper.is_none() {
            upper = Some(t);
        }
    }
    let flagged = lower.is_none() || upper.is_none();
    let (lower, upper) = (lower.unwrap_or(support.0), upper.unwrap_or(support.1));
    JumpSpacing {
        lower,
        upper,
        spacing: upper - lower,
        flagged,
    }
}
