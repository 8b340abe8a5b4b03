use std::fs;
use std::path::{Path, PathBuf};

use trust_pcl::models::Checkpoint;
use trust_pcl::trainer::{write_metrics_csv, TrainConfig, TrainMetricsRow, Trainer};

use crate::error::{CliError, CliResult};
use crate::parallel::run_jobs;
use crate::runfile::{self, checkpoint_dir_name, manifest_text, metrics_file_name, RunSpec, MANIFEST_FILE};

/// Metrics of one finished run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Output directory of the run's grid point.
    pub dir: PathBuf,
    pub seed: u64,
    pub rows: Vec<TrainMetricsRow>,
}

/// Trains one seed of `config` and returns the trainer with its metrics.
pub fn train_seed(config: &TrainConfig, seed: u64, progress: bool) -> CliResult<(Trainer, Vec<TrainMetricsRow>)> {
    let config = TrainConfig {
        seed,
        ..config.clone()
    };
    let mut trainer = Trainer::new(config)?;
    let rows = trainer.run_with(|row| {
        if progress {
            eprintln!(
                "seed {seed} iteration {} env_steps {} eval_return {} lambda {}",
                row.iteration, row.env_steps, row.eval_return, row.lambda
            );
        }
    })?;
    Ok((trainer, rows))
}

fn write_outputs(dir: &Path, seed: u64, trainer: &Trainer, rows: &[TrainMetricsRow]) -> CliResult<()> {
    write_metrics_csv(fs::File::create(dir.join(metrics_file_name(seed)))?, rows)?;
    let ckpt = dir.join(checkpoint_dir_name(seed));
    fs::create_dir_all(&ckpt)?;
    Checkpoint::from_policy(trainer.policy()).save(&ckpt.join("policy.json"))?;
    Checkpoint::from_value(trainer.value()).save(&ckpt.join("value.json"))?;
    Ok(())
}

/// Loads the config, runs every (grid point, seed) pair in parallel, and
/// writes outputs. A single grid point writes directly into `out`; a grid
/// writes point `i` into `out/point<i>`.
pub fn run(
    config: Option<&Path>,
    seeds: &[u64],
    out: &Path,
    overrides: &[String],
    progress: bool,
) -> CliResult<Vec<RunOutcome>> {
    let specs = runfile::load(config, overrides, seeds)?;
    let dirs: Vec<PathBuf> = if specs.len() == 1 {
        vec![out.to_path_buf()]
    } else {
        (0..specs.len()).map(|i| out.join(format!("point{i}"))).collect()
    };
    for (spec, dir) in specs.iter().zip(&dirs) {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(MANIFEST_FILE), manifest_text(spec))?;
    }

    let jobs: Vec<(&RunSpec, &PathBuf, u64)> = specs
        .iter()
        .zip(&dirs)
        .flat_map(|(spec, dir)| spec.seeds.iter().map(move |&s| (spec, dir, s)))
        .collect();
    let results = run_jobs(jobs.len(), |i| -> CliResult<RunOutcome> {
        let (spec, dir, seed) = jobs[i];
        let (trainer, rows) = train_seed(&spec.config, seed, progress)?;
        write_outputs(dir, seed, &trainer, &rows)?;
        Ok(RunOutcome {
            dir: dir.clone(),
            seed,
            rows,
        })
    })?;

    let mut outcomes = Vec::with_capacity(results.len());
    for result in results {
        let outcome = result?;
        match outcome.rows.last() {
            Some(last) => println!(
                "{} seed {}: {} iterations, {} env steps, final eval_return {}",
                outcome.dir.display(),
                outcome.seed,
                last.iteration,
                last.env_steps,
                last.eval_return
            ),
            None => println!("{} seed {}: no iterations", outcome.dir.display(), outcome.seed),
        }
        outcomes.push(outcome);
    }
    if outcomes.is_empty() {
        return Err(CliError::Config("seeds: no seeds to run".into()));
    }
    Ok(outcomes)
}
