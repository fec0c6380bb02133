use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{jump_spacing, replication_seed, sample_dataset, uniform_rate_statistic, EstimatorKind, TruthModel};
use crate::metrics::{hellinger, lr_distance};
use crate::model::SubDistSystem;
use crate::{Error, Result};

fn default_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::Mle, EstimatorKind::Naive]
}

fn default_radius() -> f64 {
    0.5
}

fn default_beta() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateConfig {
    pub truth: TruthModel,
    pub t0: f64,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub base_seed: u64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    /// Half-width of the window of the uniform rate statistic.
    #[serde(default = "default_radius")]
    pub uniform_radius: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            truth: TruthModel::default(),
            t0: 1.0,
            n_grid: vec![500, 1000, 2000, 4000, 8000],
            reps: 100,
            base_seed: 20_240_601,
            estimators: default_estimators(),
            uniform_radius: default_radius(),
            beta: default_beta(),
        }
    }
}

impl RateConfig {
    pub fn validate(&self) -> Result<()> {
        self.truth.validate()?;
        self.truth.local(self.t0)?;
        if self.n_grid.len() < 3 || self.n_grid.windows(2).any(|w| w[1] <= w[0]) || self.n_grid[0] == 0 {
            return Err(Error::InvalidModel("n_grid must be strictly increasing with at least 3 entries".into()));
        }
        if self.reps < 20 {
            return Err(Error::InvalidModel("reps must be at least 20".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidModel("no estimators selected".into()));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidModel("beta must lie in (0, 1)".into()));
        }
        let (a, b) = self.truth.obs.support();
        if self.t0 - self.uniform_radius < a || self.t0 + self.uniform_radius > b {
            return Err(Error::InvalidModel("uniform window leaves the observation support".into()));
        }
        Ok(())
    }
}

/// Quartiles of one metric at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub metric: String,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    /// Index into [`RateTable::slopes`].
    pub slope_rowid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeEntry {
    pub rowid: usize,
    pub metric: String,
    /// OLS slope of log median against log n.
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureCount {
    pub estimator: EstimatorKind,
    pub n: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    pub slopes: Vec<SlopeEntry>,
    pub failures: Vec<FailureCount>,
    /// Replications whose jump spacing fell back to a support edge, per
    /// `(estimator, n)` in the order of `failures`.
    pub flagged_spacings: Vec<usize>,
}

impl RateTable {
    /// `n,metric,q25,median,q75,slope_rowid`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,metric,q25,median,q75,slope_rowid\n");
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{},{}", r.n, r.metric, r.q25, r.median, r.q75, r.slope_rowid).expect("string write");
        }
        out
    }

    pub fn slope(&self, metric: &str) -> Option<f64> {
        self.slopes.iter().find(|s| s.metric == metric).map(|s| s.slope)
    }

    /// Medians of `metric` along the n grid.
    pub fn medians(&self, metric: &str) -> Vec<(usize, f64)> {
        self.rows.iter().filter(|r| r.metric == metric).map(|r| (r.n, r.median)).collect()
    }
}

/// Upper bound on worker threads: `CRCS_THREADS` if set and positive, else the
/// machine parallelism.
pub fn thread_cap() -> usize {
    std::env::var("CRCS_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Metric names produced per estimator, in output order.
fn metric_names(k: usize) -> Vec<String> {
    let mut names = vec!["hellinger".to_string(), "l1".into(), "l2".into()];
    for c in 1..=k {
        names.push(format!("local_error_{c}"));
    }
    for c in 1..=k {
        names.push(format!("jump_spacing_{c}"));
    }
    for c in 1..=k {
        names.push(format!("local_sup_{c}"));
    }
    names.push("uniform".into());
    names
}

fn replication_metrics(est: &SubDistSystem<f64>, cfg: &RateConfig, n: usize) -> Result<(Vec<f64>, bool)> {
    let tm = &cfg.truth;
    let g = &tm.obs;
    let mut out = vec![
        hellinger(est, tm, g)?.value,
        lr_distance(est, tm, g, 1)?.value,
        lr_distance(est, tm, g, 2)?.value,
    ];
    let t0 = cfg.t0;
    for c in 1..=tm.k {
        out.push((est.component(c).eval(t0) - tm.f0k(c, t0)).abs());
    }
    let mut flagged = false;
    for c in 1..=tm.k {
        let s = jump_spacing(est.component(c), t0, g.support());
        flagged |= s.flagged;
        out.push(s.spacing);
    }
    let h = (n as f64).powf(-1.0 / 3.0);
    for c in 1..=tm.k {
        let f = est.component(c);
        let target = tm.f0k(c, t0);
        let mut sup = (f.eval(t0 - h) - target).abs().max((f.left_limit(t0 + h) - target).abs());
        for t in f.jump_points().filter(|&t| t >= t0 - h && t <= t0 + h) {
            sup = sup.max((f.eval(t) - target).abs()).max((f.left_limit(t) - target).abs());
        }
        out.push(sup);
    }
    out.push(uniform_rate_statistic(est, tm, t0, cfg.uniform_radius, n, cfg.beta));
    Ok((out, flagged))
}

/// Type-7 sample quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let (lo, frac) = (h.floor() as usize, h - h.floor());
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Monte Carlo quartiles of the error metrics along the n grid, plus log-log
/// slopes of the medians. Replication `r` uses the seed
/// `replication_seed(base_seed, r)` at every `n` and for every estimator.
pub fn rate_experiment(cfg: &RateConfig) -> Result<RateTable> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_cap())
        .build()
        .map_err(|e| Error::InvalidModel(format!("thread pool: {e}")))?;
    let names = metric_names(cfg.truth.k);
    let n_est = cfg.estimators.len();

    // values[e][n_index][metric] -> per-replication values
    let mut values = vec![vec![vec![Vec::new(); names.len()]; cfg.n_grid.len()]; n_est];
    let mut failures = Vec::new();
    let mut flagged_spacings = Vec::new();
    for (ni, &n) in cfg.n_grid.iter().enumerate() {
        let per_rep: Vec<Vec<Option<(Vec<f64>, bool)>>> = pool.install(|| {
            (0..cfg.reps)
                .into_par_iter()
                .map(|rep| {
                    let seed = replication_seed(cfg.base_seed, rep as u64);
                    let Ok(d) = sample_dataset(&cfg.truth, n, seed) else {
                        return vec![None; n_est];
                    };
                    cfg.estimators
                        .iter()
                        .map(|e| e.fit(&d).and_then(|est| replication_metrics(&est, cfg, n)).ok())
                        .collect()
                })
                .collect()
        });
        for (ei, &est) in cfg.estimators.iter().enumerate() {
            let mut failed = 0;
            let mut flagged = 0;
            for rep in &per_rep {
                match &rep[ei] {
                    Some((vals, flag)) => {
                        for (mi, v) in vals.iter().enumerate() {
                            values[ei][ni][mi].push(*v);
                        }
                        flagged += usize::from(*flag);
                    }
                    None => failed += 1,
                }
            }
            failures.push(FailureCount {
                estimator: est,
                n,
                failures: failed,
            });
            flagged_spacings.push(flagged);
        }
    }

    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    let log_n: Vec<f64> = cfg.n_grid.iter().map(|&n| (n as f64).ln()).collect();
    for (ei, est) in cfg.estimators.iter().enumerate() {
        for (mi, name) in names.iter().enumerate() {
            let metric = format!("{}/{}", est.name(), name);
            let rowid = slopes.len();
            let mut medians = Vec::with_capacity(cfg.n_grid.len());
            for (ni, &n) in cfg.n_grid.iter().enumerate() {
                let mut v = values[ei][ni][mi].clone();
                v.sort_by(|a, b| a.total_cmp(b));
                let median = quantile(&v, 0.5);
                medians.push(median);
                rows.push(RateRow {
                    n,
                    metric: metric.clone(),
                    q25: quantile(&v, 0.25),
                    median,
                    q75: quantile(&v, 0.75),
                    slope_rowid: rowid,
                });
            }
            let (slope, intercept) = if medians.iter().all(|&m| m > 0.0) {
                let logs: Vec<f64> = medians.iter().map(|m| m.ln()).collect();
                ols(&log_n, &logs)
            } else {
                (f64::NAN, f64::NAN)
            };
            slopes.push(SlopeEntry {
                rowid,
                metric,
                slope,
                intercept,
            });
        }
    }
    Ok(RateTable {
        rows,
        slopes,
        failures,
        flagged_spacings,
    })
}
