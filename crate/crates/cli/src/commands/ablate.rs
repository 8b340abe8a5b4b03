use std::fs;
use std::path::Path;

use trust_pcl::trainer::{Epsilon, TauSchedule, TrainConfig, TrainMetricsRow, METRICS_HEADER};

use crate::commands::train::train_seed;
use crate::error::{CliError, CliResult};
use crate::parallel::run_jobs;
use crate::runfile::parse_override;

/// Trust-region sizes of the epsilon study; `None` is `ε = ∞` (`λ = 0`).
pub const EPSILON_ARMS: [Option<f64>; 5] = [Some(0.001), Some(0.002), Some(0.005), Some(0.01), None];

/// One named configuration of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub name: String,
    pub config: TrainConfig,
}

#[derive(Debug, Clone)]
pub struct ArmRun {
    pub arm: String,
    pub seed: u64,
    pub rows: Vec<TrainMetricsRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmSummary {
    pub arm: String,
    pub runs: usize,
    pub median_final_return: f64,
    /// Sample standard deviation of final returns (0 for a single run).
    pub std_final_return: f64,
    /// Runs whose evaluation reached the threshold.
    pub reached: usize,
    /// Median env steps to first reach the threshold, over runs that did.
    pub median_steps_to_threshold: Option<f64>,
}

/// Arm label for an epsilon value; labels sort in grid order.
pub fn epsilon_arm_name(eps: Option<f64>) -> String {
    match eps {
        Some(e) => format!("eps={e}"),
        None => "eps=inf".into(),
    }
}

/// Base config of the epsilon study: the off-policy preset with `τ`
/// decaying from 0.1. With `τ = 0` the `λ = 0` arm has no policy gradient at
/// all, so every arm gets the same small entropy bonus instead.
pub fn epsilon_study_base() -> TrainConfig {
    TrainConfig {
        tau: TauSchedule::default_decay(),
        ..TrainConfig::off_policy()
    }
}

/// The arms of `study` on `env`, with overrides applied under the arm
/// settings.
pub fn arms(study: &str, env: &str, overrides: &[String]) -> CliResult<Vec<Arm>> {
    let apply = |mut config: TrainConfig| -> CliResult<TrainConfig> {
        config.env = env.to_string();
        for arg in overrides {
            let (key, value) = parse_override(arg)?;
            config.set(&key, &value)?;
        }
        Ok(config)
    };
    let arms = match study {
        "epsilon" => {
            let base = apply(epsilon_study_base())?;
            EPSILON_ARMS
                .iter()
                .map(|&eps| Arm {
                    name: epsilon_arm_name(eps),
                    config: TrainConfig {
                        epsilon: eps.map_or(Epsilon::Infinite, Epsilon::Finite),
                        ..base.clone()
                    },
                })
                .collect()
        }
        "onoff" => vec![
            Arm {
                name: "off-policy".into(),
                config: apply(TrainConfig::off_policy())?,
            },
            Arm {
                name: "on-policy".into(),
                config: apply(TrainConfig::on_policy())?,
            },
        ],
        other => return Err(CliError::Config(format!("study: unknown study {other:?} (expected epsilon or onoff)"))),
    };
    for arm in &arms {
        arm.config.validate()?;
    }
    Ok(arms)
}

/// Header plus one line per row, sorted by (arm, seed, iteration).
pub fn merged_csv(runs: &[ArmRun]) -> String {
    let mut lines: Vec<(&str, u64, u64, String)> = runs
        .iter()
        .flat_map(|run| {
            run.rows
                .iter()
                .map(move |row| (run.arm.as_str(), run.seed, row.iteration, row.to_csv_line()))
        })
        .collect();
    lines.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
    let mut out = format!("arm,seed,{METRICS_HEADER}\n");
    for (arm, seed, _, line) in lines {
        out.push_str(&format!("{arm},{seed},{line}\n"));
    }
    out
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Env steps at the first evaluation reaching `threshold`.
pub fn steps_to_threshold(rows: &[TrainMetricsRow], threshold: f64) -> Option<u64> {
    rows.iter().find(|r| r.eval_return >= threshold).map(|r| r.env_steps)
}

/// Per-arm statistics in arm order of first appearance.
pub fn summarize(runs: &[ArmRun], threshold: f64) -> Vec<ArmSummary> {
    let mut names: Vec<&str> = Vec::new();
    for run in runs {
        if !names.contains(&run.arm.as_str()) {
            names.push(&run.arm);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let arm_runs: Vec<&ArmRun> = runs.iter().filter(|r| r.arm == name).collect();
            let finals: Vec<f64> = arm_runs
                .iter()
                .filter_map(|r| r.rows.last().map(|row| row.eval_return))
                .collect();
            let steps: Vec<f64> = arm_runs
                .iter()
                .filter_map(|r| steps_to_threshold(&r.rows, threshold))
                .map(|s| s as f64)
                .collect();
            ArmSummary {
                arm: name.to_string(),
                runs: arm_runs.len(),
                median_final_return: median(&finals),
                std_final_return: sample_std(&finals),
                reached: steps.len(),
                median_steps_to_threshold: if steps.is_empty() { None } else { Some(median(&steps)) },
            }
        })
        .collect()
}

pub fn summary_csv(summary: &[ArmSummary]) -> String {
    let mut out = String::from("arm,runs,median_final_return,std_final_return,reached,median_steps_to_threshold\n");
    for s in summary {
        let steps = s.median_steps_to_threshold.map_or("none".to_string(), |v| v.to_string());
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.arm, s.runs, s.median_final_return, s.std_final_return, s.reached, steps
        ));
    }
    out
}

/// Runs every (arm, seed) pair, then writes `<study>.csv` and
/// `<study>_summary.csv` into `out`.
pub fn run(study: &str, env: &str, seeds: u64, out: &Path, overrides: &[String], threshold: f64) -> CliResult<Vec<ArmRun>> {
    if seeds == 0 {
        return Err(CliError::Config("seeds: must be >= 1".into()));
    }
    let arms = arms(study, env, overrides)?;
    let jobs: Vec<(&Arm, u64)> = arms.iter().flat_map(|a| (0..seeds).map(move |s| (a, s))).collect();
    let results = run_jobs(jobs.len(), |i| -> CliResult<ArmRun> {
        let (arm, seed) = jobs[i];
        let (_, rows) = train_seed(&arm.config, seed, false)?;
        Ok(ArmRun {
            arm: arm.name.clone(),
            seed,
            rows,
        })
    })?;
    let runs = results.into_iter().collect::<CliResult<Vec<_>>>()?;

    fs::create_dir_all(out)?;
    fs::write(out.join(format!("{study}.csv")), merged_csv(&runs))?;
    let summary = summarize(&runs, threshold);
    fs::write(out.join(format!("{study}_summary.csv")), summary_csv(&summary))?;
    for s in &summary {
        println!(
            "{:<12} runs {} median_final {:.4} std_final {:.4} reached {}/{} median_steps {}",
            s.arm,
            s.runs,
            s.median_final_return,
            s.std_final_return,
            s.reached,
            s.runs,
            s.median_steps_to_threshold.map_or("none".to_string(), |v| v.to_string())
        );
    }
    Ok(runs)
}
