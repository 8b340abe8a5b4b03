//! Independent jobs on a bounded worker pool.

use rayon::prelude::*;

use crate::error::{CliError, CliResult};

/// Environment variable capping the number of worker threads.
pub const THREADS_VAR: &str = "TRUST_PCL_THREADS";

/// Worker count: `TRUST_PCL_THREADS` if set, else one per job.
pub fn worker_count(jobs: usize) -> CliResult<usize> {
    let cap = match std::env::var(THREADS_VAR) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|e| CliError::Config(format!("{THREADS_VAR}: invalid value {v:?} ({e})")))?;
            if n == 0 {
                return Err(CliError::Config(format!("{THREADS_VAR}: must be >= 1")));
            }
            n
        }
        Err(_) => jobs,
    };
    Ok(cap.min(jobs).max(1))
}

/// Runs `job(i)` for `i in 0..jobs` and returns results in index order.
pub fn run_jobs<T, F>(jobs: usize, job: F) -> CliResult<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(jobs)?)
        .build()
        .map_err(|e| CliError::Failed(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..jobs).into_par_iter().map(&job).collect()))
}
