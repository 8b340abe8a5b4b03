use rand::Rng as _;
use trust_pcl::consistency::{batch_loss_and_grads, ConsistencyConfig, Models, Prior};
use trust_pcl::models::{
    Action, CategoricalPolicy, GaussianPolicy, Parametric, Policy, PolicyModel, ValueModel, ValueNet,
};
use trust_pcl::nn::{finite_diff_check, MlpShape};
use trust_pcl::replay::{Segment, Transition};
use trust_pcl::{seeded_rng, Rng};

use crate::error::{CliError, CliResult};

/// Largest accepted coordinatewise relative error.
pub const GRAD_TOLERANCE: f64 = 1e-4;
/// Central-difference step.
pub const STEP: f64 = 1e-5;
/// Random instances per check.
const TRIALS: u64 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub name: &'static str,
    pub max_rel_error: f64,
}

fn uniform_vec(rng: &mut Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn gaussian(rng: &mut Rng, obs: usize, act: usize) -> Policy {
    let shape = MlpShape::tanh(obs, &[5, 4], act).expect("valid shape");
    let mean = shape.init_params(1.0, rng);
    let log_std = uniform_vec(rng, act, 0.5);
    Policy::Gaussian(GaussianPolicy::new(shape, &mean, &log_std).expect("valid gaussian"))
}

fn categorical(rng: &mut Rng, obs: usize, actions: usize) -> Policy {
    let shape = MlpShape::tanh(obs, &[5], actions).expect("valid shape");
    let params = shape.init_params(1.0, rng);
    Policy::Categorical(CategoricalPolicy::new(shape, &params).expect("valid categorical"))
}

fn value_net(rng: &mut Rng, obs: usize) -> ValueNet {
    let shape = MlpShape::tanh(2 * obs, &[5, 4], 1).expect("valid shape");
    let params = shape.init_params(1.0, rng);
    ValueNet::new(shape, &params).expect("valid value net")
}

fn corrupt(grad: &mut [f64], fault: bool) {
    if fault {
        grad[0] = grad[0] * 1.01 + 1e-3;
    }
}

fn check_policy(policy: &Policy, obs: &[f64], action: &Action, fault: bool) -> CliResult<f64> {
    let (_, mut grad) = policy.log_prob_with_grad(obs, action)?;
    corrupt(&mut grad, fault);
    let loss = |theta: &[f64]| {
        let mut p = policy.clone();
        p.set_params(theta).expect("same length");
        p.log_prob(obs, action).expect("valid input")
    };
    Ok(finite_diff_check(loss, &grad, policy.params(), STEP))
}

/// A batch covering stitched successors, a timeout and a terminal.
fn random_batch(rng: &mut Rng, obs: usize, act: usize) -> Vec<Segment> {
    let transition = |rng: &mut Rng| Transition {
        obs: uniform_vec(rng, obs, 1.0),
        action: Action::Continuous(uniform_vec(rng, act, 1.5)),
        reward: rng.random_range(-3.0..3.0),
        log_prob: 0.0,
        terminal: false,
        timeout: false,
    };
    let segment = |rng: &mut Rng, episode_id, start_index, len| Segment {
        episode_id,
        start_index,
        transitions: (0..len).map(|_| transition(rng)).collect(),
        next_obs: uniform_vec(rng, obs, 1.0),
        priority: 0.0,
    };
    let mut segs = vec![
        segment(rng, 0, 0, 4),
        segment(rng, 0, 4, 3),
        segment(rng, 1, 0, 4),
        segment(rng, 2, 8, 2),
    ];
    segs[1].transitions[0].obs = segs[0].next_obs.clone();
    segs[1].transitions[2].timeout = true;
    segs[3].transitions[1].terminal = true;
    segs
}

/// Runs every gradient check on fixed random instances.
pub fn run_checks(inject_fault: bool) -> CliResult<Vec<GradReport>> {
    let mut worst = [0.0f64; 5];
    for trial in 0..TRIALS {
        let mut rng = seeded_rng(0x6ead_0000 + trial);
        let fault = inject_fault && trial == 0;

        let policy = gaussian(&mut rng, 3, 2);
        let obs = uniform_vec(&mut rng, 3, 1.0);
        let action = Action::Continuous(uniform_vec(&mut rng, 2, 2.0));
        worst[0] = worst[0].max(check_policy(&policy, &obs, &action, fault)?);

        let policy = categorical(&mut rng, 3, 4);
        let action = Action::Discrete(rng.random_range(0..4));
        worst[1] = worst[1].max(check_policy(&policy, &obs, &action, fault)?);

        let value = value_net(&mut rng, 3);
        let (_, mut grad) = value.value_with_grad(&obs)?;
        corrupt(&mut grad, fault);
        let loss = |phi: &[f64]| {
            let mut v = value.clone();
            v.set_params(phi).expect("same length");
            v.value(&obs).expect("valid input")
        };
        worst[2] = worst[2].max(finite_diff_check(loss, &grad, value.params(), STEP));

        let (obs_dim, act_dim) = (2, 1);
        let segs = random_batch(&mut rng, obs_dim, act_dim);
        let batch: Vec<&Segment> = segs.iter().chain(segs.iter().take(1)).collect();
        let policy = gaussian(&mut rng, obs_dim, act_dim);
        let prior = gaussian(&mut rng, obs_dim, act_dim);
        let value = value_net(&mut rng, obs_dim);
        let lagged = value_net(&mut rng, obs_dim);
        let cfg = ConsistencyConfig {
            d: 3,
            gamma: 0.9,
            tau: 0.1,
            lambda: 0.4,
            huber_delta: 1.0,
        };
        let models = |p: &Policy, v: &ValueNet| {
            batch_loss_and_grads(
                &batch,
                Models {
                    policy: p,
                    value: v,
                    lagged_value: &lagged,
                    prior: Prior::Policy(&prior),
                },
                &cfg,
            )
        };
        let mut result = models(&policy, &value)?;
        corrupt(&mut result.grad_policy, fault);
        corrupt(&mut result.grad_value, fault);
        let policy_loss = |theta: &[f64]| {
            let mut p = policy.clone();
            p.set_params(theta).expect("same length");
            models(&p, &value).expect("valid batch").loss
        };
        worst[3] = worst[3].max(finite_diff_check(policy_loss, &result.grad_policy, policy.params(), STEP));
        let value_loss = |phi: &[f64]| {
            let mut v = value.clone();
            v.set_params(phi).expect("same length");
            models(&policy, &v).expect("valid batch").loss
        };
        worst[4] = worst[4].max(finite_diff_check(value_loss, &result.grad_value, value.params(), STEP));
    }
    let names = [
        "gaussian log-density",
        "categorical log-density",
        "value network",
        "batch loss (policy)",
        "batch loss (value)",
    ];
    Ok(names
        .into_iter()
        .zip(worst)
        .map(|(name, max_rel_error)| GradReport { name, max_rel_error })
        .collect())
}

pub fn run(inject_fault: bool) -> CliResult<()> {
    let reports = run_checks(inject_fault)?;
    for r in &reports {
        println!("{:<24} max_rel_error {:.3e}", r.name, r.max_rel_error);
    }
    let worst = reports
        .iter()
        .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
        .expect("at least one check");
    println!("worst: {} ({:.3e}, tolerance {:.0e})", worst.name, worst.max_rel_error, GRAD_TOLERANCE);
    if worst.max_rel_error < GRAD_TOLERANCE {
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "gradient check failed: {} has relative error {:.3e}",
            worst.name, worst.max_rel_error
        )))
    }
}
