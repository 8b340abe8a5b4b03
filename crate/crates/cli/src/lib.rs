//! Command-line front end: training, evaluation, oracle verification,
//! gradient checks, `λ` tracing, and ablation studies.
//!
//! Exit codes: 0 success, 1 failed check or I/O failure, 2 configuration
//! error, 3 numeric failure during training.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod error;
pub mod parallel;
pub mod runfile;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "trust-pcl", version, about = "Trust-PCL training and verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one run per seed (and per grid point) and write metrics,
    /// checkpoints, and a manifest.
    Train {
        /// Config file of `key = value` lines; defaults to the off-policy preset.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seed to run; repeatable. Overrides a `seeds` line in the config.
        #[arg(long = "seed")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
        /// `key=value` applied after the config file; repeatable.
        #[arg(long = "override")]
        overrides: Vec<String>,
        /// Print each metrics row to stderr as it is produced.
        #[arg(long)]
        progress: bool,
    },
    /// Mean greedy return of a saved policy.
    Evaluate {
        /// `policy.json`, or a checkpoint directory containing it.
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        env: String,
        #[arg(long)]
        env_max_steps: Option<usize>,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Verify the multi-step consistency identity on the tabular corpus.
    OracleCheck {
        /// Comma-separated seeds, or a file of seeds; defaults to the
        /// built-in corpus.
        #[arg(long)]
        corpus: Option<String>,
        #[arg(long, default_value_t = 5)]
        d_max: usize,
        /// Write a JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Compare analytic gradients with central differences.
    GradCheck {
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// KL-versus-λ and λ-versus-ε curves for a set of returns.
    LambdaTrace {
        /// File of returns (whitespace or comma separated, `#` comments).
        #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
        returns: Option<PathBuf>,
        /// `kind=uniform|normal,n=N,a=A,b=B,seed=S`: `n` draws from
        /// U[a, b] or N(a, b²).
        #[arg(long)]
        synthetic: Option<String>,
        /// Trust-region sizes; repeatable.
        #[arg(long = "epsilon", default_values_t = [0.001, 0.002, 0.005, 0.01])]
        epsilons: Vec<f64>,
        /// Episode length multiplying `ε` into the KL target.
        #[arg(long, default_value_t = 1.0)]
        episode_length: f64,
        /// Log-spaced λ grid points over [1e-4, 1e4].
        #[arg(long, default_value_t = 61)]
        grid_points: usize,
        /// Directory for `kl_curve.csv` and `lambda_curve.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an ablation grid over seeds and write one merged CSV.
    Ablate {
        /// `epsilon` or `onoff`.
        #[arg(long)]
        study: String,
        #[arg(long, default_value = "point-mass")]
        env: String,
        /// Number of seeds, run as seeds 0..k.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
        /// `key=value` applied to every arm; repeatable.
        #[arg(long = "override")]
        overrides: Vec<String>,
        /// Return level used for the steps-to-threshold summary.
        #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
        threshold: f64,
    },
}

/// Parses arguments, runs the command, and returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Train {
            config,
            seeds,
            out,
            overrides,
            progress,
        } => commands::train::run(config.as_deref(), &seeds, &out, &overrides, progress).map(|_| ()),
        Command::Evaluate {
            checkpoint,
            env,
            env_max_steps,
            episodes,
            seed,
        } => commands::evaluate::run(&checkpoint, &env, env_max_steps, episodes, seed).map(|_| ()),
        Command::OracleCheck {
            corpus,
            d_max,
            report,
            inject_fault,
        } => commands::oracle_check::run(corpus.as_deref(), d_max, report.as_deref(), inject_fault),
        Command::GradCheck { inject_fault } => commands::grad_check::run(inject_fault),
        Command::LambdaTrace {
            returns,
            synthetic,
            epsilons,
            episode_length,
            grid_points,
            out,
        } => commands::lambda_trace::run(
            returns.as_deref(),
            synthetic.as_deref(),
            &epsilons,
            episode_length,
            grid_points,
            out.as_deref(),
        ),
        Command::Ablate {
            study,
            env,
            seeds,
            out,
            overrides,
            threshold,
        } => commands::ablate::run(&study, &env, seeds, &out, &overrides, threshold).map(|_| ()),
    }
}
