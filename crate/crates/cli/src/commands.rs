use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crcs_core::lab::{
    minimax_bound, rate_experiment, sample_dataset, two_point_risk, EstimatorKind, FailureCount, RateConfig, SlopeEntry,
    TruthModel, TwoPointRisk,
};
use crcs_core::metrics::{hellinger, lr_distance, total_variation};
use crcs_core::{
    cone_loglik, fenchel_check, loglik, mle_estimate, naive_estimate, Dataset, Error, FenchelReport, MleOptions, StepFn,
    SubDistSystem,
};

use crate::Method;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NONCONVERGENCE: u8 = 3;
pub const EXIT_CERTIFICATION: u8 = 4;

pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::NonConvergence { .. }) => EXIT_NONCONVERGENCE,
        _ => EXIT_INPUT,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EstimateFile {
    method: String,
    #[serde(rename = "K")]
    k: usize,
    components: Vec<StepFn<f64>>,
    tail_mass_total: f64,
    tail_unique: bool,
    /// `None` when the likelihood is zero.
    loglik: Option<f64>,
    fenchel: Option<FenchelReport<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sum_violations: Option<Vec<(f64, f64)>>,
}

#[derive(Serialize)]
struct MetricsFile {
    hellinger: f64,
    tv: f64,
    l1: f64,
    l2: f64,
    quadrature_error_bound: f64,
    sum_violation: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    truth: TruthModel,
    n: usize,
    seed: u64,
}

#[derive(Serialize)]
struct RatesSummary<'a> {
    config: &'a RateConfig,
    slopes: &'a [SlopeEntry],
    failures: &'a [FailureCount],
    flagged_spacings: &'a [usize],
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MinimaxConfig {
    truth: TruthModel,
    t0: f64,
    k: usize,
    r: u32,
    c: f64,
    n: usize,
    reps: usize,
    seed: u64,
    estimator: EstimatorKind,
}

impl Default for MinimaxConfig {
    fn default() -> Self {
        Self {
            truth: TruthModel::default(),
            t0: 1.0,
            k: 1,
            r: 1,
            c: 1.0,
            n: 2000,
            reps: 200,
            seed: 20_240_601,
            estimator: EstimatorKind::Mle,
        }
    }
}

#[derive(Serialize)]
struct MinimaxFile {
    d: f64,
    bound: f64,
    single_risk_bound: f64,
    k: usize,
    r: u32,
    t0: f64,
    two_point: Option<TwoPointRisk>,
}

fn read_dataset(path: &Path, k: usize) -> Result<Dataset<f64>> {
    let file = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Dataset::from_csv_reader(file, k).map_err(|e| anyhow::Error::new(e).context(format!("reading {}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot open {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn emit_json(out: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(out, &text)
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn estimate(
    method: Method,
    k: usize,
    input: &Path,
    out: Option<&Path>,
    certify: bool,
    tol: f64,
    max_iters: usize,
) -> Result<u8> {
    let d = read_dataset(input, k)?;
    let (file, passed) = match method {
        Method::Mle => {
            let opts = MleOptions {
                fenchel_tol: tol,
                max_iters,
                ..MleOptions::default()
            };
            let r = mle_estimate(&d, &opts)?;
            let passed = r.certificate.passed;
            let file = EstimateFile {
                method: "mle".into(),
                k,
                components: r.system.into_components(),
                tail_mass_total: r.tail_mass_total,
                tail_unique: r.tail_unique,
                loglik: finite(r.loglik),
                fenchel: Some(r.certificate),
                sum_violations: None,
            };
            (file, passed)
        }
        Method::Naive => {
            let r = naive_estimate(&d);
            let system = r.as_system();
            let report = if certify { fenchel_check(&d, &system, tol).ok() } else { None };
            let passed = report.as_ref().is_some_and(|f| f.passed);
            let file = EstimateFile {
                method: "naive".into(),
                k,
                loglik: finite(loglik(&d, &system)),
                components: system.into_components(),
                tail_mass_total: 0.0,
                tail_unique: true,
                fenchel: report,
                sum_violations: Some(r.sum_violations),
            };
            (file, passed)
        }
    };
    emit_json(out, &file)?;
    if certify && !passed {
        eprintln!("certification failed");
        return Ok(EXIT_CERTIFICATION);
    }
    Ok(EXIT_OK)
}

fn read_estimate(path: &Path) -> Result<(EstimateFile, SubDistSystem<f64>)> {
    let file: EstimateFile = read_json(path)?;
    if file.components.len() != file.k {
        bail!("{}: K = {} but {} components", path.display(), file.k, file.components.len());
    }
    let system = SubDistSystem::cone(file.components.clone())?;
    Ok((file, system))
}

pub fn certify(input: &Path, estimate: &Path, out: Option<&Path>, tol: f64) -> Result<u8> {
    let (file, system) = read_estimate(estimate)?;
    let d = read_dataset(input, file.k)?;
    let feasible = system.total_mass() <= 1.0 + 1e-9
        && d.times().iter().all(|&t| system.eval_plus(t) <= 1.0 + 1e-9);
    if !feasible {
        eprintln!("estimate violates F_+ <= 1");
        return Ok(EXIT_CERTIFICATION);
    }
    let report = match fenchel_check(&d, &system, tol) {
        Ok(r) => r,
        Err(e @ Error::ZeroDenominator { .. }) => {
            eprintln!("{e}");
            return Ok(EXIT_CERTIFICATION);
        }
        Err(e) => return Err(e.into()),
    };
    emit_json(out, &report)?;
    if report.passed {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "certification failed: violation {} > {} (cone criterion {})",
            report.violation(),
            tol,
            cone_loglik(&d, &system)
        );
        Ok(EXIT_CERTIFICATION)
    }
}

pub fn metrics(estimate: &Path, truth: Option<&Path>, out: Option<&Path>) -> Result<u8> {
    let (_, system) = read_estimate(estimate)?;
    let tm: TruthModel = match truth {
        Some(p) => read_json(p)?,
        None => TruthModel::default(),
    };
    tm.validate()?;
    let g = &tm.obs;
    let h = hellinger(&system, &tm, g)?;
    let tv = total_variation(&system, &tm, g)?;
    let l1 = lr_distance(&system, &tm, g, 1)?;
    let l2 = lr_distance(&system, &tm, g, 2)?;
    let all = [h, tv, l1, l2];
    emit_json(
        out,
        &MetricsFile {
            hellinger: h.value,
            tv: tv.value,
            l1: l1.value,
            l2: l2.value,
            quadrature_error_bound: all.iter().map(|m| m.quadrature_error_bound).fold(0.0, f64::max),
            sum_violation: all.iter().map(|m| m.sum_violation).fold(0.0, f64::max),
        },
    )?;
    Ok(EXIT_OK)
}

pub fn simulate(config: &Path, out: Option<&Path>, n: Option<usize>, seed: Option<u64>) -> Result<u8> {
    let cfg: SimulateConfig = read_json(config)?;
    let d = sample_dataset(&cfg.truth, n.unwrap_or(cfg.n), seed.unwrap_or(cfg.seed))?;
    emit(out, &d.to_csv_string())?;
    Ok(EXIT_OK)
}

pub fn rates(
    config: Option<&Path>,
    out: Option<&Path>,
    summary: Option<&Path>,
    reps: Option<usize>,
    seed: Option<u64>,
) -> Result<u8> {
    let mut cfg: RateConfig = match config {
        Some(p) => read_json(p)?,
        None => RateConfig::default(),
    };
    if let Some(r) = reps {
        cfg.reps = r;
    }
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    let table = rate_experiment(&cfg)?;
    let csv = table.to_csv();
    match out {
        Some(p) => {
            fs::write(p, &csv).with_context(|| format!("cannot write {}", p.display()))?;
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "metric,slope,intercept")?;
            for s in &table.slopes {
                writeln!(stdout, "{},{},{}", s.metric, s.slope, s.intercept)?;
            }
        }
        None => emit(None, &csv)?,
    }
    if let Some(p) = summary {
        emit_json(
            Some(p),
            &RatesSummary {
                config: &cfg,
                slopes: &table.slopes,
                failures: &table.failures,
                flagged_spacings: &table.flagged_spacings,
            },
        )?;
    }
    Ok(EXIT_OK)
}

pub fn minimax(config: Option<&Path>, eval_only: bool, out: Option<&Path>) -> Result<u8> {
    let cfg: MinimaxConfig = match config {
        Some(p) => read_json(p)?,
        None => MinimaxConfig::default(),
    };
    cfg.truth.validate()?;
    let lt = cfg.truth.local(cfg.t0)?;
    let b = minimax_bound(&lt, cfg.k, cfg.r)?;
    let two_point = if eval_only {
        None
    } else {
        Some(two_point_risk(
            &cfg.truth,
            cfg.k,
            cfg.c,
            cfg.n,
            cfg.t0,
            cfg.reps,
            cfg.seed,
            cfg.estimator,
            cfg.r,
        )?)
    };
    emit_json(
        out,
        &MinimaxFile {
            d: b.d,
            bound: b.bound,
            single_risk_bound: b.single_risk_bound,
            k: cfg.k,
            r: cfg.r,
            t0: cfg.t0,
            two_point,
        },
    )?;
    Ok(EXIT_OK)
}
