//! The collect/train loop.
//!
//! Each iteration collects `P` environment steps with the stochastic policy,
//! stores them as replay segments, takes one Adam step on `θ` and
//! `value_steps` Adam steps on `φ` from a sampled batch of about `Q`
//! transitions, moves the lagged parameters, re-solves `λ` and advances the
//! `τ` schedule. Gradient steps wait until the buffer holds `Q` transitions
//! and at least two episodes have finished.

mod config;
mod metrics;

pub use config::{Epsilon, LambdaMode, PriorMode, TauSchedule, TrainConfig};
pub use metrics::{metrics_csv, parse_metrics_csv, write_metrics_csv, TrainMetricsRow, METRICS_HEADER};

use std::time::Instant;

use rand::RngCore;

use crate::consistency::{batch_loss_and_grads, BatchLoss, ConsistencyConfig, Models, Prior};
use crate::envs::{make_env, ActionKind, EnvSpec, Environment};
use crate::models::{Action, CategoricalPolicy, GaussianPolicy, Parametric, Policy, PolicyModel, ValueNet};
use crate::nn::AdamState;
use crate::replay::{EpisodeLog, EpisodeRecord, ReplayBuffer, Segment, Transition};
use crate::trust::{LagState, LambdaSolver};
use crate::{seeded_rng, Error, Result, Rng};

/// Training episode seeds have the top bit clear, evaluation seeds have it
/// set, so the two never coincide.
const EVAL_SEED_BIT: u64 = 1 << 63;
const EVAL_SEED_SALT: u64 = 0x00e7_a15e_ed5a_1700;

/// Environment driver that keeps an unfinished episode across calls.
pub struct Collector {
    env: Box<dyn Environment>,
    obs: Option<Vec<f64>>,
    episode_id: u64,
    index: usize,
    episode_return: f64,
    next_episode_id: u64,
}

/// Output of one [`Collector::collect`] call.
#[derive(Debug, Clone, PartialEq)]
pub struct Collected {
    /// One segment per contiguous episode piece, in order. Priorities are 0.
    pub segments: Vec<Segment>,
    pub episodes: Vec<EpisodeRecord>,
}

impl Collector {
    pub fn new(env: Box<dyn Environment>) -> Self {
        Self {
            env,
            obs: None,
            episode_id: 0,
            index: 0,
            episode_return: 0.0,
            next_episode_id: 0,
        }
    }

    pub fn spec(&self) -> EnvSpec {
        self.env.spec()
    }

    /// Takes `steps` stochastic policy steps, resetting after every terminal
    /// or timeout. Episode reset seeds are drawn from `rng`.
    pub fn collect(&mut self, policy: &Policy, steps: usize, rng: &mut Rng) -> Result<Collected> {
        let mut out = Collected {
            segments: Vec::new(),
            episodes: Vec::new(),
        };
        let mut current: Option<Segment> = None;
        for _ in 0..steps {
            let obs = match self.obs.take() {
                Some(obs) => obs,
                None => {
                    let seed = rng.next_u64() & !EVAL_SEED_BIT;
                    self.episode_id = self.next_episode_id;
                    self.next_episode_id += 1;
                    self.index = 0;
                    self.episode_return = 0.0;
                    self.env.reset(seed)
                }
            };
            let action = policy.sample(&obs, rng)?;
            let log_prob = policy.log_prob(&obs, &action)?;
            let result = self.env.step(&action)?;
            let segment = current.get_or_insert_with(|| Segment {
                episode_id: self.episode_id,
                start_index: self.index,
                transitions: Vec::new(),
                next_obs: Vec::new(),
                priority: 0.0,
            });
            segment.transitions.push(Transition {
                obs,
                action,
                reward: result.reward,
                log_prob,
                terminal: result.terminal,
                timeout: result.timeout,
            });
            self.index += 1;
            self.episode_return += result.reward;
            if result.done() {
                let mut segment = current.take().expect("segment started above");
                segment.next_obs = result.obs;
                out.segments.push(segment);
                out.episodes.push(EpisodeRecord {
                    total_return: self.episode_return,
                    length: self.index,
                });
            } else {
                self.obs = Some(result.obs);
            }
        }
        if let Some(mut segment) = current {
            segment.next_obs = self.obs.clone().expect("episode continues");
            out.segments.push(segment);
        }
        Ok(out)
    }
}

/// Evaluation episode seeds for a training seed.
pub fn eval_seeds(seed: u64, episodes: usize) -> Vec<u64> {
    let mut rng = seeded_rng(seed ^ EVAL_SEED_SALT);
    (0..episodes).map(|_| rng.next_u64() | EVAL_SEED_BIT).collect()
}

/// Mean undiscounted return of `act` over one episode per seed.
pub fn evaluate_with<F>(env: &mut dyn Environment, seeds: &[u64], mut act: F) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<Action>,
{
    if seeds.is_empty() {
        return Err(Error::Config("eval.episodes: must be >= 1".into()));
    }
    let mut total = 0.0;
    for &seed in seeds {
        let mut obs = env.reset(seed);
        loop {
            let result = env.step(&act(&obs)?)?;
            total += result.reward;
            if result.done() {
                break;
            }
            obs = result.obs;
        }
    }
    Ok(total / seeds.len() as f64)
}

/// Mean greedy return of `policy`.
pub fn evaluate(env: &mut dyn Environment, policy: &Policy, seeds: &[u64]) -> Result<f64> {
    evaluate_with(env, seeds, |obs| policy.greedy(obs))
}

/// Diagnostics of the latest iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStats {
    /// Whether gradient steps were taken.
    pub trained: bool,
    pub loss: f64,
    pub num_windows: usize,
    /// `λ` used for this iteration's gradient step.
    pub lambda: f64,
    pub tau: f64,
    pub kl_estimate: f64,
    pub kl_target: f64,
}

/// All state owned by one training run.
pub struct Trainer {
    config: TrainConfig,
    collector: Collector,
    eval_env: Box<dyn Environment>,
    eval_seeds: Vec<u64>,
    policy: Policy,
    value: ValueNet,
    lag: LagState,
    adam_policy: AdamState,
    adam_value: AdamState,
    buffer: ReplayBuffer,
    log: EpisodeLog,
    solver: LambdaSolver,
    rng: Rng,
    iteration: u64,
    env_steps: u64,
    lambda: f64,
    kl_estimate: f64,
    kl_target: f64,
    loss: f64,
    started: Instant,
}

impl Trainer {
    /// Validates the config and initializes every component from its seed.
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let env = make_env(&config.env, config.env_max_steps)?;
        let eval_env = make_env(&config.env, config.env_max_steps)?;
        let spec = env.spec();
        let mut rng = seeded_rng(config.seed);
        let policy = match &spec.action {
            ActionKind::Continuous { low, .. } => Policy::Gaussian(GaussianPolicy::init_with(
                spec.obs_dim,
                low.len(),
                &config.hidden,
                config.init_log_std,
                &mut rng,
            )?),
            ActionKind::Discrete { count } => {
                if config.prior == PriorMode::Uniform && *count == 0 {
                    return Err(Error::Config("prior: uniform prior needs at least one action".into()));
                }
                Policy::Categorical(CategoricalPolicy::init_with(spec.obs_dim, *count, &config.hidden, &mut rng)?)
            }
        };
        if config.prior == PriorMode::Uniform && !matches!(spec.action, ActionKind::Discrete { .. }) {
            return Err(Error::Config(format!(
                "prior: uniform prior needs discrete actions, {} is continuous",
                config.env
            )));
        }
        let value = ValueNet::init_with(spec.obs_dim, &config.hidden, &mut rng)?;
        let lag = LagState::new(&policy, &value, config.alpha)?;
        let adam_policy = AdamState::new(Parametric::num_params(&policy), config.lr_policy);
        let adam_value = AdamState::new(Parametric::num_params(&value), config.lr_value);
        let buffer = ReplayBuffer::new(config.buffer_capacity, config.beta)?;
        let solver = LambdaSolver::with_initial(config.lambda_initial)
            .map_err(|e| Error::Config(format!("lambda.initial: {e}")))?;
        let lambda = match (config.lambda, config.epsilon) {
            (LambdaMode::Fixed(l), _) => l,
            (LambdaMode::Auto, Epsilon::Infinite) => 0.0,
            (LambdaMode::Auto, Epsilon::Finite(_)) => solver.current(),
        };
        Ok(Self {
            eval_seeds: eval_seeds(config.seed, config.eval_episodes),
            collector: Collector::new(env),
            eval_env,
            policy,
            value,
            lag,
            adam_policy,
            adam_value,
            buffer,
            log: EpisodeLog::default(),
            solver,
            rng,
            iteration: 0,
            env_steps: 0,
            lambda,
            kl_estimate: 0.0,
            kl_target: 0.0,
            loss: 0.0,
            started: Instant::now(),
            config,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn spec(&self) -> EnvSpec {
        self.collector.spec()
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn value(&self) -> &ValueNet {
        &self.value
    }

    pub fn lag(&self) -> &LagState {
        &self.lag
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn episode_log(&self) -> &EpisodeLog {
        &self.log
    }

    /// Completed iterations.
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    /// `λ` for the next gradient step.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `τ` for the next gradient step.
    pub fn tau(&self) -> f64 {
        self.config.tau.at(self.iteration)
    }

    fn consistency_config(&self, tau: f64) -> ConsistencyConfig {
        ConsistencyConfig {
            d: self.config.d,
            gamma: self.config.gamma,
            tau,
            lambda: self.lambda,
            huber_delta: self.config.huber_delta,
        }
    }

    fn batch_loss(&self, batch: &[&Segment], cfg: &ConsistencyConfig) -> Result<BatchLoss> {
        let prior = match (self.config.prior, &self.policy) {
            (PriorMode::Uniform, Policy::Categorical(p)) => Prior::Uniform(p.num_actions()),
            _ => Prior::Policy(&self.lag.policy),
        };
        let models = Models {
            policy: &self.policy,
            value: &self.value,
            lagged_value: &self.lag.value,
            prior,
        };
        batch_loss_and_grads(batch, models, cfg)
    }

    /// Runs one collect/train/update iteration.
    pub fn train_iteration(&mut self) -> Result<IterationStats> {
        let iteration = self.iteration;
        self.step_inner().map_err(|e| match e {
            Error::Numeric(msg) => Error::Numeric(format!("iteration {iteration}: {msg}")),
            other => other,
        })
    }

    fn step_inner(&mut self) -> Result<IterationStats> {
        let tau = self.config.tau.at(self.iteration);
        let p = self.config.collect_steps;
        let collected = self.collector.collect(&self.policy, p, &mut self.rng)?;
        for segment in collected.segments {
            self.buffer.insert(segment, self.iteration)?;
        }
        for record in &collected.episodes {
            self.log.log_episode(record.total_return, record.length)?;
        }
        self.env_steps += p as u64;

        let cfg = self.consistency_config(tau);
        let mut stats = IterationStats {
            trained: false,
            loss: 0.0,
            num_windows: 0,
            lambda: self.lambda,
            tau,
            kl_estimate: self.kl_estimate,
            kl_target: self.kl_target,
        };
        if self.buffer.num_transitions() >= self.config.batch_transitions && self.log.len() >= 2 {
            let indices = self.buffer.sample_indices(self.config.batch_transitions, p, &mut self.rng)?;
            let batch: Vec<Segment> = indices
                .iter()
                .map(|&i| self.buffer.get(i).expect("sampled index in range").clone())
                .collect();
            let batch: Vec<&Segment> = batch.iter().collect();
            let first = self.batch_loss(&batch, &cfg)?;
            if !first.grad_policy.all_finite() || !first.grad_value.all_finite() {
                return Err(Error::Numeric("non-finite gradient".into()));
            }
            self.adam_policy.step(self.policy.params_mut(), &first.grad_policy)?;
            self.adam_value.step(self.value.params_mut(), &first.grad_value)?;
            for _ in 1..self.config.value_steps {
                let again = self.batch_loss(&batch, &cfg)?;
                self.adam_value.step(self.value.params_mut(), &again.grad_value)?;
            }
            self.loss = first.loss;
            stats.trained = true;
            stats.loss = first.loss;
            stats.num_windows = first.num_windows;
        }

        self.lag.update(&self.policy, &self.value)?;

        if let (LambdaMode::Auto, Epsilon::Finite(epsilon)) = (self.config.lambda, self.config.epsilon) {
            match self.solver.solve(&self.log, epsilon) {
                Ok(solution) => {
                    self.lambda = solution.lambda;
                    self.kl_estimate = solution.kl;
                    self.kl_target = solution.target;
                }
                Err(Error::InsufficientData(_)) => {}
                Err(e) => return Err(e),
            }
        }
        stats.kl_estimate = self.kl_estimate;
        stats.kl_target = self.kl_target;
        self.iteration += 1;
        Ok(stats)
    }

    /// Mean greedy return over the fixed evaluation seeds.
    pub fn evaluate(&mut self) -> Result<f64> {
        evaluate(self.eval_env.as_mut(), &self.policy, &self.eval_seeds)
    }

    fn metrics_row(&mut self, tau: f64) -> Result<TrainMetricsRow> {
        Ok(TrainMetricsRow {
            iteration: self.iteration,
            env_steps: self.env_steps,
            eval_return: self.evaluate()?,
            lambda: self.lambda,
            kl_estimate: self.kl_estimate,
            kl_target: self.kl_target,
            loss: self.loss,
            tau,
            seconds: if self.config.wall_clock {
                self.started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        })
    }

    /// Runs the configured number of iterations, evaluating every
    /// `eval.interval` iterations and after the last one. `on_row` sees each
    /// row as it is produced. Stops early once an evaluation reaches
    /// `stop.eval_return`.
    pub fn run_with<F>(&mut self, mut on_row: F) -> Result<Vec<TrainMetricsRow>>
    where
        F: FnMut(&TrainMetricsRow),
    {
        let mut rows = Vec::new();
        while self.iteration < self.config.steps {
            let stats = self.train_iteration()?;
            if self.iteration.is_multiple_of(self.config.eval_interval) || self.iteration == self.config.steps {
                let row = self.metrics_row(stats.tau)?;
                on_row(&row);
                rows.push(row);
                if matches!(self.config.stop_eval_return, Some(t) if row.eval_return >= t) {
                    break;
                }
            }
        }
        Ok(rows)
    }

    pub fn run(&mut self) -> Result<Vec<TrainMetricsRow>> {
        self.run_with(|_| {})
    }
}

/// Validates, trains, and returns the metrics table.
pub fn run(config: TrainConfig) -> Result<Vec<TrainMetricsRow>> {
    Trainer::new(config)?.run()
}
