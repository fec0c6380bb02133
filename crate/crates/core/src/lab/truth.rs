use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Failure-time law of one cause, conditional on that cause.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CauseShape {
    Exponential { rate: f64 },
    Weibull { shape: f64, scale: f64 },
}

impl CauseShape {
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match *self {
            CauseShape::Exponential { rate } => -(-rate * t).exp_m1(),
            CauseShape::Weibull { shape, scale } => -(-(t / scale).powf(shape)).exp_m1(),
        }
    }

    pub fn pdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match *self {
            CauseShape::Exponential { rate } => rate * (-rate * t).exp(),
            CauseShape::Weibull { shape, scale } => {
                let z = t / scale;
                shape / scale * z.powf(shape - 1.0) * (-z.powf(shape)).exp()
            }
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let e = -(-u).ln_1p();
        match *self {
            CauseShape::Exponential { rate } => e / rate,
            CauseShape::Weibull { shape, scale } => scale * e.powf(1.0 / shape),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            CauseShape::Exponential { rate } => rate.is_finite() && rate > 0.0,
            CauseShape::Weibull { shape, scale } => {
                shape.is_finite() && shape > 0.0 && scale.is_finite() && scale > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!("bad cause shape {self:?}")))
        }
    }
}

/// Distribution `G` of the observation time, on a bounded interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ObsDistribution {
    Uniform { a: f64, b: f64 },
    /// Exponential with the given rate conditioned on `[a, b]`.
    TruncatedExponential { rate: f64, a: f64, b: f64 },
}

impl ObsDistribution {
    pub fn support(&self) -> (f64, f64) {
        match *self {
            ObsDistribution::Uniform { a, b } | ObsDistribution::TruncatedExponential { a, b, .. } => (a, b),
        }
    }

    pub fn pdf(&self, t: f64) -> f64 {
        let (a, b) = self.support();
        if t < a || t > b {
            return 0.0;
        }
        match *self {
            ObsDistribution::Uniform { .. } => 1.0 / (b - a),
            ObsDistribution::TruncatedExponential { rate, .. } => {
                rate * (-rate * (t - a)).exp() / -(-rate * (b - a)).exp_m1()
            }
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        let (a, b) = self.support();
        if t <= a {
            return 0.0;
        }
        if t >= b {
            return 1.0;
        }
        match *self {
            ObsDistribution::Uniform { .. } => (t - a) / (b - a),
            ObsDistribution::TruncatedExponential { rate, .. } => {
                (-rate * (t - a)).exp_m1() / (-rate * (b - a)).exp_m1()
            }
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let (a, b) = self.support();
        match *self {
            ObsDistribution::Uniform { .. } => a + u * (b - a),
            ObsDistribution::TruncatedExponential { rate, .. } => {
                let mass = (-rate * (b - a)).exp_m1();
                (a - (u * mass).ln_1p() / rate).min(b)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let (a, b) = self.support();
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::UnboundedSupport);
        }
        if a >= b {
            return Err(Error::InvalidModel(format!("empty observation support [{a}, {b}]")));
        }
        if let ObsDistribution::TruncatedExponential { rate, .. } = *self {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(Error::InvalidModel(format!("bad observation rate {rate}")));
            }
        }
        Ok(())
    }
}

/// Ground truth for simulations: `F_0k = p_k * shape_k` and `G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthModel {
    #[serde(rename = "K")]
    pub k: usize,
    pub cause_probs: Vec<f64>,
    pub cause_shapes: Vec<CauseShape>,
    pub obs: ObsDistribution,
}

impl Default for TruthModel {
    /// Two exponential causes with rate 1 and weight 1/2 each, `G = U(0, 2)`.
    fn default() -> Self {
        Self {
            k: 2,
            cause_probs: vec![0.5, 0.5],
            cause_shapes: vec![CauseShape::Exponential { rate: 1.0 }; 2],
            obs: ObsDistribution::Uniform { a: 0.0, b: 2.0 },
        }
    }
}

impl TruthModel {
    pub fn new(cause_probs: Vec<f64>, cause_shapes: Vec<CauseShape>, obs: ObsDistribution) -> Result<Self> {
        let tm = Self {
            k: cause_probs.len(),
            cause_probs,
            cause_shapes,
            obs,
        };
        tm.validate()?;
        Ok(tm)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::NoCauses);
        }
        if self.cause_probs.len() != self.k || self.cause_shapes.len() != self.k {
            return Err(Error::InvalidModel(format!(
                "K = {} but {} probabilities and {} shapes",
                self.k,
                self.cause_probs.len(),
                self.cause_shapes.len()
            )));
        }
        if self.cause_probs.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidModel("cause probabilities must be positive".into()));
        }
        let total: f64 = self.cause_probs.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::InvalidModel(format!("cause probabilities sum to {total} > 1")));
        }
        for s in &self.cause_shapes {
            s.validate()?;
        }
        self.obs.validate()
    }

    /// `F_0k(t)`, `k` 1-based.
    pub fn f0k(&self, k: usize, t: f64) -> f64 {
        self.cause_probs[k - 1] * self.cause_shapes[k - 1].cdf(t)
    }

    /// Density `f_0k(t)`.
    pub fn density(&self, k: usize, t: f64) -> f64 {
        self.cause_probs[k - 1] * self.cause_shapes[k - 1].pdf(t)
    }

    pub fn f0_plus(&self, t: f64) -> f64 {
        (1..=self.k).map(|k| self.f0k(k, t)).sum()
    }

    pub fn g(&self, t: f64) -> f64 {
        self.obs.pdf(t)
    }

    pub fn local(&self, t0: f64) -> Result<LocalTruth> {
        let f0k: Vec<f64> = (1..=self.k).map(|k| self.f0k(k, t0)).collect();
        let dens: Vec<f64> = (1..=self.k).map(|k| self.density(k, t0)).collect();
        LocalTruth::new(t0, f0k, dens, self.g(t0), Some(&self.cause_probs))
    }
}

/// Truth at a fixed point `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTruth {
    pub t0: f64,
    pub f0k_at_t0: Vec<f64>,
    pub density_at_t0: Vec<f64>,
    pub f0plus_at_t0: f64,
    pub g_at_t0: f64,
    /// `a_k = 1 / F_0k(t0)` followed by `a_{K+1} = 1 / (1 - F_0+(t0))`.
    pub a: Vec<f64>,
}

impl LocalTruth {
    /// Checks `0 < F_0k(t0) < p_k` (when `p` is known), `f_0k(t0) > 0` and
    /// `g(t0) > 0`.
    pub fn new(t0: f64, f0k_at_t0: Vec<f64>, density_at_t0: Vec<f64>, g_at_t0: f64, p: Option<&[f64]>) -> Result<Self> {
        if f0k_at_t0.len() != density_at_t0.len() || f0k_at_t0.is_empty() {
            return Err(Error::InvalidModel("local truth needs one value and density per cause".into()));
        }
        for (i, (&f, &dens)) in f0k_at_t0.iter().zip(&density_at_t0).enumerate() {
            let cap = p.map_or(1.0, |p| p[i]);
            if !(f > 0.0 && f < cap && dens > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "cause {}: need 0 < F_0k(t0) < p_k and f_0k(t0) > 0",
                    i + 1
                )));
            }
        }
        if !(g_at_t0 > 0.0) {
            return Err(Error::InvalidModel("g(t0) must be positive".into()));
        }
        let f0plus_at_t0: f64 = f0k_at_t0.iter().sum();
        if f0plus_at_t0 >= 1.0 {
            return Err(Error::InvalidModel("F_0+(t0) must be below 1".into()));
        }
        let mut a: Vec<f64> = f0k_at_t0.iter().map(|f| 1.0 / f).collect();
        a.push(1.0 / (1.0 - f0plus_at_t0));
        Ok(Self {
            t0,
            f0k_at_t0,
            density_at_t0,
            f0plus_at_t0,
            g_at_t0,
            a,
        })
    }

    pub fn k(&self) -> usize {
        self.f0k_at_t0.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_invert_cdfs() {
        let shapes = [
            CauseShape::Exponential { rate: 0.7 },
            CauseShape::Weibull { shape: 1.7, scale: 2.0 },
        ];
        for s in shapes {
            for u in [0.01, 0.3, 0.5, 0.99] {
                assert!((s.cdf(s.quantile(u)) - u).abs() < 1e-12);
            }
        }
        let gs = [
            ObsDistribution::Uniform { a: 0.5, b: 3.0 },
            ObsDistribution::TruncatedExponential { rate: 1.3, a: 0.2, b: 4.0 },
        ];
        for g in gs {
            for u in [0.0, 0.25, 0.5, 0.999] {
                assert!((g.cdf(g.quantile(u)) - u).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn densities_integrate_to_cdf() {
        let g = ObsDistribution::TruncatedExponential { rate: 2.0, a: 0.0, b: 1.0 };
        let h = 1e-4;
        let mut acc = 0.0;
        let mut t = 0.0;
        while t < 0.6 - 1e-12 {
            acc += h * g.pdf(t + h / 2.0);
            t += h;
        }
        assert!((acc - g.cdf(0.6)).abs() < 1e-7);
    }

    #[test]
    fn model_validation() {
        assert!(TruthModel::default().validate().is_ok());
        let bad = TruthModel::new(vec![0.7, 0.6], vec![CauseShape::Exponential { rate: 1.0 }; 2], ObsDistribution::Uniform { a: 0.0, b: 1.0 });
        assert!(matches!(bad, Err(Error::InvalidModel(_))));
        let unbounded = TruthModel::new(
            vec![0.5],
            vec![CauseShape::Exponential { rate: 1.0 }],
            ObsDistribution::Uniform { a: 0.0, b: f64::INFINITY },
        );
        assert!(matches!(unbounded, Err(Error::UnboundedSupport)));
    }

    #[test]
    fn local_truth_weights() {
        let lt = TruthModel::default().local(1.0).unwrap();
        let f = 0.5 * (1.0 - (-1.0f64).exp());
        assert!((lt.a[0] - 1.0 / f).abs() < 1e-12);
        assert!((lt.a[2] - 1.0 / (1.0 - 2.0 * f)).abs() < 1e-12);
        assert_eq!(lt.g_at_t0, 0.5);
    }
}
