use std::fs;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use trust_pcl::seeded_rng;
use trust_pcl::trust::{estimate_kl, LambdaSolution, LambdaSolver};

use crate::error::{CliError, CliResult};

/// Relative slack allowed for roundoff when checking monotonicity.
const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaTrace {
    /// `(λ, KL)` over a log-spaced grid, ascending in `λ`.
    pub kl_curve: Vec<(f64, f64)>,
    /// `(ε, solution)`, ascending in `ε`.
    pub lambda_curve: Vec<(f64, LambdaSolution)>,
}

/// Parses `kind=uniform|normal,n=N,a=A,b=B,seed=S` and draws the returns.
pub fn synthetic_returns(spec: &str) -> CliResult<Vec<f64>> {
    let mut kind = "uniform".to_string();
    let (mut n, mut a, mut b, mut seed) = (100usize, 0.0f64, 1.0f64, 0u64);
    for part in spec.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("synthetic: expected key=value, got {part:?}")))?;
        let bad = |e: &dyn std::fmt::Display| CliError::Config(format!("synthetic: {k}: invalid value {v:?} ({e})"));
        match k.trim() {
            "kind" => kind = v.trim().to_string(),
            "n" => n = v.trim().parse().map_err(|e| bad(&e))?,
            "a" => a = v.trim().parse().map_err(|e| bad(&e))?,
            "b" => b = v.trim().parse().map_err(|e| bad(&e))?,
            "seed" => seed = v.trim().parse().map_err(|e| bad(&e))?,
            other => return Err(CliError::Config(format!("synthetic: unknown key {other:?}"))),
        }
    }
    let mut rng = seeded_rng(seed);
    match kind.as_str() {
        "uniform" => {
            if !(a <= b) {
                return Err(CliError::Config(format!("synthetic: need a <= b, got {a}, {b}")));
            }
            Ok((0..n).map(|_| if a == b { a } else { rng.random_range(a..b) }).collect())
        }
        "normal" => {
            let dist = Normal::new(a, b).map_err(|e| CliError::Config(format!("synthetic: {e}")))?;
            Ok((0..n).map(|_| dist.sample(&mut rng)).collect())
        }
        other => Err(CliError::Config(format!("synthetic: unknown kind {other:?}"))),
    }
}

/// Reads returns separated by whitespace or commas; `#` starts a comment.
pub fn read_returns(path: &Path) -> CliResult<Vec<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("returns file {}: {e}", path.display())))?;
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split([',', ' ', '\t']))
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|e| CliError::Config(format!("returns: invalid value {s:?} ({e})")))
        })
        .collect()
}

/// Computes both curves and checks that KL is non-increasing in `λ` and
/// `λ` is non-increasing in `ε`.
pub fn trace(returns: &[f64], epsilons: &[f64], episode_length: f64, grid_points: usize) -> CliResult<LambdaTrace> {
    if returns.len() < 2 {
        return Err(CliError::Config(format!("returns: need at least 2, got {}", returns.len())));
    }
    if grid_points < 2 {
        return Err(CliError::Config("grid-points: must be >= 2".into()));
    }
    if !(episode_length > 0.0 && episode_length.is_finite()) {
        return Err(CliError::Config(format!("episode-length: must be > 0, got {episode_length}")));
    }
    if epsilons.is_empty() {
        return Err(CliError::Config("epsilon: at least one value needed".into()));
    }
    if let Some(e) = epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(CliError::Config(format!("epsilon: must be > 0, got {e}")));
    }
    let solver = LambdaSolver::default();
    let (lo, hi) = (1e-4f64.ln(), 1e4f64.ln());
    let kl_curve = (0..grid_points)
        .map(|i| {
            let lambda = (lo + (hi - lo) * i as f64 / (grid_points - 1) as f64).exp();
            Ok((lambda, estimate_kl(returns, lambda)?.kl))
        })
        .collect::<trust_pcl::Result<Vec<_>>>()?;
    let mut sorted = epsilons.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lambda_curve = sorted
        .iter()
        .map(|&eps| Ok((eps, solver.solve_for_target(returns, eps * episode_length)?)))
        .collect::<trust_pcl::Result<Vec<_>>>()?;

    for w in kl_curve.windows(2) {
        if w[1].1 > w[0].1 + MONOTONE_SLACK * w[0].1.abs().max(1e-300) {
            return Err(CliError::Failed(format!(
                "KL increases from {} at lambda {} to {} at lambda {}",
                w[0].1, w[0].0, w[1].1, w[1].0
            )));
        }
    }
    for w in lambda_curve.windows(2) {
        if w[1].1.lambda > w[0].1.lambda {
            return Err(CliError::Failed(format!(
                "lambda increases from {} at epsilon {} to {} at epsilon {}",
                w[0].1.lambda, w[0].0, w[1].1.lambda, w[1].0
            )));
        }
    }
    Ok(LambdaTrace { kl_curve, lambda_curve })
}

pub fn run(
    returns: Option<&Path>,
    synthetic: Option<&str>,
    epsilons: &[f64],
    episode_length: f64,
    grid_points: usize,
    out: Option<&Path>,
) -> CliResult<()> {
    let values = match (returns, synthetic) {
        (Some(path), None) => read_returns(path)?,
        (None, Some(spec)) => synthetic_returns(spec)?,
        _ => return Err(CliError::Config("returns: give exactly one of --returns or --synthetic".into())),
    };
    let trace = trace(&values, epsilons, episode_length, grid_points)?;
    let mut kl_csv = String::from("lambda,kl\n");
    for (lambda, kl) in &trace.kl_curve {
        kl_csv.push_str(&format!("{lambda},{kl}\n"));
    }
    let mut lambda_csv = String::from("epsilon,target,lambda,kl,status\n");
    for (eps, s) in &trace.lambda_curve {
        lambda_csv.push_str(&format!("{eps},{},{},{},{:?}\n", s.target, s.lambda, s.kl, s.status));
        println!("epsilon {eps}: lambda {} (kl {}, target {}, {:?})", s.lambda, s.kl, s.target, s.status);
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("kl_curve.csv"), kl_csv)?;
        fs::write(dir.join("lambda_curve.csv"), lambda_csv)?;
    }
    println!("monotonicity holds over {} lambda values and {} epsilons", trace.kl_curve.len(), trace.lambda_curve.len());
    Ok(())
}
