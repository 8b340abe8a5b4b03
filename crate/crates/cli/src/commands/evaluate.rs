use std::path::Path;

use trust_pcl::envs::make_env;
use trust_pcl::models::Checkpoint;
use trust_pcl::trainer::{eval_seeds, evaluate};

use crate::error::{CliError, CliResult};

/// Prints and returns the mean greedy return of a saved policy.
pub fn run(checkpoint: &Path, env: &str, env_max_steps: Option<usize>, episodes: usize, seed: u64) -> CliResult<f64> {
    if episodes == 0 {
        return Err(CliError::Config("episodes: must be >= 1".into()));
    }
    let path = if checkpoint.is_dir() {
        checkpoint.join("policy.json")
    } else {
        checkpoint.to_path_buf()
    };
    let policy = Checkpoint::load(&path)?.to_policy()?;
    let mut env = make_env(env, env_max_steps)?;
    let spec = env.spec();
    if spec.obs_dim != policy.obs_dim() {
        return Err(CliError::Config(format!(
            "env: observation width {} does not match the policy's {}",
            spec.obs_dim,
            policy.obs_dim()
        )));
    }
    let mean = evaluate(env.as_mut(), &policy, &eval_seeds(seed, episodes))?;
    println!("mean_return = {mean}");
    Ok(mean)
}
