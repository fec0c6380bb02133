//! Distances between sub-distribution systems, integrated against `G`.
//!
//! All three distances sum over the `K` causes plus the survival component
//! `F_{K+1} = 1 - F_+`. The integrals run over the support of `G`, split at
//! every jump of either argument and at uniform knots, with 16-point
//! Gauss-Legendre on each piece. Between jumps the integrands are smooth, so
//! the difference to the 8-point rule is reported as an error bound.

use serde::{Deserialize, Serialize};

use crate::lab::{ObsDistribution, PerturbedModel, TruthModel};
use crate::model::SubDistSystem;
use crate::{Error, Result};

pub const DEFAULT_KNOTS: usize = 64;

/// A system of sub-distribution functions that can be evaluated pointwise.
pub trait SubDistribution {
    fn k(&self) -> usize;
    /// `F_k(t)` for `k` in `1..=K`.
    fn eval(&self, k: usize, t: f64) -> f64;
    /// Discontinuity points (empty for continuous systems).
    fn breakpoints(&self) -> Vec<f64>;

    fn eval_plus(&self, t: f64) -> f64 {
        (1..=self.k()).map(|k| self.eval(k, t)).sum()
    }
}

impl SubDistribution for SubDistSystem<f64> {
    fn k(&self) -> usize {
        SubDistSystem::k(self)
    }

    fn eval(&self, k: usize, t: f64) -> f64 {
        self.component(k).eval(t)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.merged_jump_points()
    }
}

impl SubDistribution for TruthModel {
    fn k(&self) -> usize {
        self.k
    }

    fn eval(&self, k: usize, t: f64) -> f64 {
        self.f0k(k, t)
    }

    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl SubDistribution for PerturbedModel {
    fn k(&self) -> usize {
        self.base().k
    }

    fn eval(&self, k: usize, t: f64) -> f64 {
        PerturbedModel::eval(self, k, t)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.window_points().to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Hellinger,
    Tv,
    Lr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub kind: MetricKind,
    pub r: Option<u32>,
    pub value: f64,
    pub quadrature_error_bound: f64,
    /// Largest excess of `F_+` over one seen at the quadrature nodes of the
    /// first argument; the survival term is clamped at zero there.
    pub sum_violation: f64,
}

/// `h = sqrt(1/2 sum_k int (sqrt F_k - sqrt F0_k)^2 dG)`.
pub fn hellinger(f: &impl SubDistribution, f0: &impl SubDistribution, g: &ObsDistribution) -> Result<MetricValue> {
    metric_with_knots(MetricKind::Hellinger, None, f, f0, g, DEFAULT_KNOTS)
}

/// `1/2 sum_k int |F_k - F0_k| dG`.
pub fn total_variation(f: &impl SubDistribution, f0: &impl SubDistribution, g: &ObsDistribution) -> Result<MetricValue> {
    metric_with_knots(MetricKind::Tv, None, f, f0, g, DEFAULT_KNOTS)
}

/// `(sum_k int |F_k - F0_k|^r dG)^(1/r)`.
pub fn lr_distance(f: &impl SubDistribution, f0: &impl SubDistribution, g: &ObsDistribution, r: u32) -> Result<MetricValue> {
    metric_with_knots(MetricKind::Lr, Some(r), f, f0, g, DEFAULT_KNOTS)
}

/// Any of the distances with a chosen number of uniform knots.
pub fn metric_with_knots(
    kind: MetricKind,
    r: Option<u32>,
    f: &impl SubDistribution,
    f0: &impl SubDistribution,
    g: &ObsDistribution,
    knots: usize,
) -> Result<MetricValue> {
    if f.k() != f0.k() {
        return Err(Error::ComponentCount {
            got: f.k(),
            expected: f0.k(),
        });
    }
    let (a, b) = g.support();
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::UnboundedSupport);
    }
    let power = match (kind, r) {
        (MetricKind::Lr, Some(r)) if r >= 1 => r as i32,
        (MetricKind::Lr, _) => return Err(Error::InvalidModel("L_r distance needs r >= 1".into())),
        _ => 1,
    };
    let k = f.k();
    let mut violation = 0.0f64;
    let mut integrand = |t: f64| -> f64 {
        let mut acc = 0.0;
        let (mut plus, mut plus0) = (0.0, 0.0);
        for c in 1..=k {
            let (x, y) = (f.eval(c, t), f0.eval(c, t));
            plus += x;
            plus0 += y;
            acc += term(kind, power, x, y);
        }
        violation = violation.max(plus - 1.0);
        let (x, y) = ((1.0 - plus).max(0.0), (1.0 - plus0).max(0.0));
        (acc + term(kind, power, x, y)) * g.pdf(t)
    };

    let mut cuts: Vec<f64> = (0..=knots.max(1))
        .map(|i| a + (b - a) * i as f64 / knots.max(1) as f64)
        .collect();
    cuts.extend(f.breakpoints().into_iter().chain(f0.breakpoints()).filter(|&t| t > a && t < b));
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    cuts.dedup();
    if kind == MetricKind::Tv || power == 1 {
        // |F - F0| has a kink wherever the two cross
        let crossings: Vec<f64> = cuts.windows(2).flat_map(|w| crossings(f, f0, w[0], w[1])).collect();
        cuts.extend(crossings);
        cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
        cuts.dedup();
    }

    let (n16, w16) = gauss_legendre(16);
    let (n8, w8) = gauss_legendre(8);
    let mut total = 0.0;
    let mut err = 0.0;
    for w in cuts.windows(2) {
        let (l, r) = (w[0], w[1]);
        if r <= l {
            continue;
        }
        let (mid, half) = ((l + r) / 2.0, (r - l) / 2.0);
        let hi: f64 = n16.iter().zip(&w16).map(|(x, wt)| wt * integrand(mid + half * x)).sum::<f64>() * half;
        let lo: f64 = n8.iter().zip(&w8).map(|(x, wt)| wt * integrand(mid + half * x)).sum::<f64>() * half;
        total += hi;
        err += (hi - lo).abs();
    }
    let (value, bound) = match kind {
        MetricKind::Hellinger => {
            let h2 = (0.5 * total).max(0.0);
            let h = h2.sqrt();
            // d sqrt(x) <= err / (2 sqrt(x)) away from zero, sqrt(err) near it
            let b = if h > 0.0 { (0.5 * err / (2.0 * h)).min((0.5 * err).sqrt()) } else { (0.5 * err).sqrt() };
            (h, b)
        }
        MetricKind::Tv => (0.5 * total, 0.5 * err),
        MetricKind::Lr => {
            let v = total.max(0.0).powf(1.0 / power as f64);
            let b = if power == 1 { err } else { (total + err).max(0.0).powf(1.0 / power as f64) - v };
            (v, b)
        }
    };
    Ok(MetricValue {
        kind,
        r,
        value,
        quadrature_error_bound: bound,
        sum_violation: violation.max(0.0),
    })
}

/// Sign changes of `F_k - F0_k` (and of the survival difference) inside
/// `(l, r)`, assuming each difference is monotone there.
fn crossings(f: &impl SubDistribution, f0: &impl SubDistribution, l: f64, r: f64) -> Vec<f64> {
    let eps = (r - l) * 1e-9;
    let (lo, hi) = (l + eps, r - eps);
    if hi <= lo {
        return Vec::new();
    }
    let diff = |c: usize, t: f64| -> f64 {
        if c == 0 {
            f0.eval_plus(t) - f.eval_plus(t)
        } else {
            f.eval(c, t) - f0.eval(c, t)
        }
    };
    let mut out = Vec::new();
    for c in 0..=f.k() {
        let (mut a, mut b) = (lo, hi);
        let da = diff(c, a);
        if da == 0.0 || da.signum() == diff(c, b).signum() {
            continue;
        }
        for _ in 0..100 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if diff(c, mid).signum() == da.signum() {
                a = mid;
            } else {
                b = mid;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

fn term(kind: MetricKind, power: i32, x: f64, y: f64) -> f64 {
    match kind {
        MetricKind::Hellinger => {
            let d = x.max(0.0).sqrt() - y.max(0.0).sqrt();
            d * d
        }
        MetricKind::Tv => (x - y).abs(),
        MetricKind::Lr => (x - y).abs().powi(power),
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StepFn;

    fn constant(v: f64) -> SubDistSystem<f64> {
        SubDistSystem::new(vec![StepFn::new(v, vec![], 0.0).unwrap()]).unwrap()
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(16);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((m - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn constant_quarter_against_zero() {
        let g = ObsDistribution::Uniform { a: 0.0, b: 1.0 };
        let (f, f0) = (constant(0.25), constant(0.0));
        let h = hellinger(&f, &f0, &g).unwrap();
        let want = (0.5 * (0.25 + (1.0 - 0.75f64.sqrt()).powi(2))).sqrt();
        assert!((h.value - want).abs() < 1e-12);
        let tv = total_variation(&f, &f0, &g).unwrap();
        assert!((tv.value - 0.25).abs() < 1e-12);
        assert_eq!(hellinger(&f, &f, &g).unwrap().value, 0.0);
    }

    #[test]
    fn lr_needs_positive_order() {
        let g = ObsDistribution::Uniform { a: 0.0, b: 1.0 };
        assert!(lr_distance(&constant(0.1), &constant(0.0), &g, 0).is_err());
    }
}
