//! `crcs`: estimation, certification and simulation for competing-risks
//! current status data.
//!
//! Exit codes: 0 success, 2 invalid input, 3 estimator did not converge,
//! 4 certification failed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser)]
#[command(name = "crcs", version, about = "Competing-risks current status estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Mle,
    Naive,
}

#[derive(Subcommand)]
enum Command {
    /// Fit an estimator to a `time,status` CSV and write the estimate as JSON.
    Estimate {
        #[arg(long, value_enum, default_value = "mle")]
        method: Method,
        /// Number of causes.
        #[arg(long = "k")]
        k: usize,
        #[arg(long)]
        input: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Embed the optimality certificate and exit with 4 if it fails.
        #[arg(long)]
        certify: bool,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iters: usize,
    },
    /// Check an estimate file against its data.
    Certify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Distances between an estimate and a truth model.
    Metrics {
        #[arg(long)]
        estimate: PathBuf,
        /// Truth model JSON; the default model when omitted.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a dataset from a truth model.
    Simulate {
        /// `{"truth": ..., "n": ..., "seed": ...}`.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monte Carlo rate experiment.
    Rates {
        /// Experiment config; the default experiment when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Quartile table CSV; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON summary with slopes and failure counts.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Local minimax lower bound and two-point risks.
    Minimax {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Only evaluate the bound, skip the Monte Carlo risks.
        #[arg(long)]
        eval_only: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate {
            method,
            k,
            input,
            out,
            certify,
            tol,
            max_iters,
        } => commands::estimate(method, k, &input, out.as_deref(), certify, tol, max_iters),
        Command::Certify {
            input,
            estimate,
            out,
            tol,
        } => commands::certify(&input, &estimate, out.as_deref(), tol),
        Command::Metrics { estimate, truth, out } => commands::metrics(&estimate, truth.as_deref(), out.as_deref()),
        Command::Simulate { config, out, n, seed } => commands::simulate(&config, out.as_deref(), n, seed),
        Command::Rates {
            config,
            out,
            summary,
            reps,
            seed,
        } => commands::rates(config.as_deref(), out.as_deref(), summary.as_deref(), reps, seed),
        Command::Minimax { config, eval_only, out } => commands::minimax(config.as_deref(), eval_only, out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
