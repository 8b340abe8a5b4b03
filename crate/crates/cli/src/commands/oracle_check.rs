use std::fs;
use std::path::Path;

use serde::Serialize;
use trust_pcl::oracle::{
    corpus_instance, softmax_value_iteration, verify_consistency, CORPUS_SEEDS, CORPUS_SETTINGS, DEFAULT_TOL,
};

use crate::error::{CliError, CliResult};
use crate::runfile::parse_seeds;

/// Largest allowed consistency violation.
pub const VIOLATION_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct SettingReport {
    pub tau: f64,
    pub lambda: f64,
    pub residual: f64,
    /// Violation for `d = 1 ..= d_max`.
    pub violations: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MdpReport {
    pub seed: u64,
    pub num_states: usize,
    pub num_actions: usize,
    pub deterministic: bool,
    pub settings: Vec<SettingReport>,
    pub max_violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub d_max: usize,
    pub threshold: f64,
    pub mdps: Vec<MdpReport>,
    pub max_violation: f64,
    pub passed: bool,
}

/// Seeds from a comma-separated list or a file of seeds.
pub fn resolve_corpus(corpus: Option<&str>) -> CliResult<Vec<u64>> {
    let Some(spec) = corpus else {
        return Ok(CORPUS_SEEDS.to_vec());
    };
    let path = Path::new(spec);
    let text = if path.is_file() {
        fs::read_to_string(path)?
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split([',', ' ', '\t']))
            .filter(|s| !s.trim().is_empty())
            .collect::<Vec<_>>()
            .join(",")
    } else {
        spec.to_string()
    };
    let seeds = parse_seeds("corpus", &text)?;
    if seeds.is_empty() {
        return Err(CliError::Config("corpus: no seeds".into()));
    }
    Ok(seeds)
}

/// Solves every corpus MDP under every setting and measures violations.
/// With `inject_fault`, the first solution has 0.1 added to one state value.
pub fn check(seeds: &[u64], d_max: usize, inject_fault: bool) -> CliResult<OracleReport> {
    if d_max == 0 {
        return Err(CliError::Config("d-max: must be >= 1".into()));
    }
    let mut mdps = Vec::with_capacity(seeds.len());
    let mut overall: f64 = 0.0;
    for (i, &seed) in seeds.iter().enumerate() {
        let inst = corpus_instance(seed);
        let mut settings = Vec::new();
        for (j, &(tau, lambda)) in CORPUS_SETTINGS.iter().enumerate() {
            let mut solution = softmax_value_iteration(&inst.mdp, &inst.prior, tau, lambda, DEFAULT_TOL)?;
            if inject_fault && i == 0 && j == 0 {
                solution.stage_values[0][0] += 0.1;
            }
            let violations = (1..=d_max)
                .map(|d| verify_consistency(&inst.mdp, &solution, &inst.prior, tau, lambda, d))
                .collect::<trust_pcl::Result<Vec<f64>>>()?;
            settings.push(SettingReport {
                tau,
                lambda,
                residual: solution.residual,
                violations,
            });
        }
        let max_violation = settings
            .iter()
            .flat_map(|s| s.violations.iter().copied())
            .fold(0.0, f64::max);
        overall = overall.max(max_violation);
        mdps.push(MdpReport {
            seed,
            num_states: inst.mdp.num_states,
            num_actions: inst.mdp.num_actions,
            deterministic: inst.mdp.is_deterministic(),
            settings,
            max_violation,
        });
    }
    Ok(OracleReport {
        d_max,
        threshold: VIOLATION_THRESHOLD,
        mdps,
        max_violation: overall,
        passed: overall <= VIOLATION_THRESHOLD,
    })
}

pub fn run(corpus: Option<&str>, d_max: usize, report: Option<&Path>, inject_fault: bool) -> CliResult<()> {
    let seeds = resolve_corpus(corpus)?;
    let result = check(&seeds, d_max, inject_fault)?;
    for mdp in &result.mdps {
        println!(
            "seed {:>6}  S={} A={} {:<13} max_violation {:.3e}",
            mdp.seed,
            mdp.num_states,
            mdp.num_actions,
            if mdp.deterministic { "deterministic" } else { "stochastic" },
            mdp.max_violation
        );
    }
    println!(
        "overall max_violation {:.3e} over {} MDPs, d = 1..={} (threshold {:.0e})",
        result.max_violation,
        result.mdps.len(),
        d_max,
        VIOLATION_THRESHOLD
    );
    if let Some(path) = report {
        fs::write(path, serde_json::to_string_pretty(&result)?)?;
    }
    if result.passed {
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "consistency violation {:.3e} exceeds {:.0e}",
            result.max_violation, VIOLATION_THRESHOLD
        )))
    }
}
