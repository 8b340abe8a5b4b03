//! Training configuration as flat `key = value` entries with dotted keys.

use std::fmt::Display;
use std::str::FromStr;

use crate::{Error, Result};

/// Trust-region size: a finite `ε`, or `∞` for no relative-entropy penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon {
    Finite(f64),
    Infinite,
}

/// How `λ` is chosen each iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaMode {
    /// Solved from `ε` over recent episodes (`λ = 0` when `ε = ∞`).
    Auto,
    Fixed(f64),
}

/// Reference policy in the relative-entropy term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorMode {
    /// Lagged parameters `θ̃`.
    Lagged,
    /// Fixed uniform distribution (discrete actions only).
    Uniform,
}

/// Entropy coefficient per iteration: constant `initial`, or
/// `τ_k = initial · factor^(k / every)` when decaying.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauSchedule {
    pub decay: bool,
    pub initial: f64,
    pub factor: f64,
    pub every: f64,
}

impl TauSchedule {
    pub fn constant(tau: f64) -> Self {
        Self {
            decay: false,
            initial: tau,
            factor: 0.1,
            every: 2500.0,
        }
    }

    /// Decays from 0.1 by a factor 0.1 every 2500 iterations.
    pub fn default_decay() -> Self {
        Self {
            decay: true,
            initial: 0.1,
            factor: 0.1,
            every: 2500.0,
        }
    }

    pub fn at(&self, iteration: u64) -> f64 {
        if self.decay {
            self.initial * self.factor.powf(iteration as f64 / self.every)
        } else {
            self.initial
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub env: String,
    /// Episode cutoff override; `None` keeps the environment default.
    pub env_max_steps: Option<usize>,
    pub epsilon: Epsilon,
    pub lambda: LambdaMode,
    pub lambda_initial: f64,
    pub prior: PriorMode,
    /// Rollout length `d`.
    pub d: usize,
    pub gamma: f64,
    /// Environment steps collected per iteration `P`.
    pub collect_steps: usize,
    /// Transitions per sampled batch `Q`.
    pub batch_transitions: usize,
    pub alpha: f64,
    pub beta: f64,
    pub lr_policy: f64,
    pub lr_value: f64,
    pub tau: TauSchedule,
    /// Training iterations `N`.
    pub steps: u64,
    pub seed: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub value_steps: usize,
    pub huber_delta: f64,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    /// Stop after the first evaluation reaching this mean return.
    pub stop_eval_return: Option<f64>,
    /// Record real elapsed time in the metrics; off keeps the CSV
    /// bit-reproducible.
    pub wall_clock: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::off_policy()
    }
}

impl TrainConfig {
    /// Replay-based defaults: `P = 10`, `Q = 64`, `α = 0.99`, `β = 0.001`.
    pub fn off_policy() -> Self {
        Self {
            env: "point-mass".into(),
            env_max_steps: None,
            epsilon: Epsilon::Finite(0.01),
            lambda: LambdaMode::Auto,
            lambda_initial: 1.0,
            prior: PriorMode::Lagged,
            d: 10,
            gamma: 0.995,
            collect_steps: 10,
            batch_transitions: 64,
            alpha: 0.99,
            beta: 0.001,
            lr_policy: 1e-4,
            lr_value: 1e-4,
            tau: TauSchedule::constant(0.0),
            steps: 20_000,
            seed: 0,
            eval_interval: 500,
            eval_episodes: 10,
            value_steps: 1,
            huber_delta: 1.0,
            buffer_capacity: 5000,
            hidden: vec![64, 64],
            init_log_std: 0.0,
            stop_eval_return: None,
            wall_clock: false,
        }
    }

    /// Near on-policy variant: `α = 0.95`, `β = 0.1`, `P = 1000`,
    /// `Q = 25 P`, larger learning rates and several value steps.
    pub fn on_policy() -> Self {
        Self {
            alpha: 0.95,
            beta: 0.1,
            collect_steps: 1000,
            batch_transitions: 25_000,
            lr_policy: 1e-3,
            lr_value: 1e-3,
            value_steps: 5,
            steps: 200,
            eval_interval: 5,
            ..Self::off_policy()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "off-policy" => Ok(Self::off_policy()),
            "on-policy" => Ok(Self::on_policy()),
            _ => Err(Error::Config(format!("preset: unknown preset {name:?}"))),
        }
    }

    /// Every key with its canonical value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        vec![
            ("env", self.env.clone()),
            ("env.max_steps", opt(self.env_max_steps.map(|v| v.to_string()))),
            (
                "epsilon",
                match self.epsilon {
                    Epsilon::Finite(e) => e.to_string(),
                    Epsilon::Infinite => "inf".into(),
                },
            ),
            (
                "lambda",
                match self.lambda {
                    LambdaMode::Auto => "auto".into(),
                    LambdaMode::Fixed(l) => l.to_string(),
                },
            ),
            ("lambda.initial", self.lambda_initial.to_string()),
            (
                "prior",
                match self.prior {
                    PriorMode::Lagged => "lagged".into(),
                    PriorMode::Uniform => "uniform".into(),
                },
            ),
            ("d", self.d.to_string()),
            ("gamma", self.gamma.to_string()),
            ("collect_steps", self.collect_steps.to_string()),
            ("batch_transitions", self.batch_transitions.to_string()),
            ("alpha", self.alpha.to_string()),
            ("beta", self.beta.to_string()),
            ("lr.policy", self.lr_policy.to_string()),
            ("lr.value", self.lr_value.to_string()),
            ("tau.schedule", if self.tau.decay { "decay" } else { "constant" }.into()),
            ("tau.initial", self.tau.initial.to_string()),
            ("tau.decay_factor", self.tau.factor.to_string()),
            ("tau.decay_every", self.tau.every.to_string()),
            ("steps", self.steps.to_string()),
            ("seed", self.seed.to_string()),
            ("eval.interval", self.eval_interval.to_string()),
            ("eval.episodes", self.eval_episodes.to_string()),
            ("value_steps", self.value_steps.to_string()),
            ("huber_delta", self.huber_delta.to_string()),
            ("buffer_capacity", self.buffer_capacity.to_string()),
            (
                "model.hidden",
                self.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","),
            ),
            ("model.init_log_std", self.init_log_std.to_string()),
            ("stop.eval_return", opt(self.stop_eval_return.map(|v| v.to_string()))),
            ("wall_clock", self.wall_clock.to_string()),
        ]
    }

    /// Known keys, in canonical order.
    pub fn keys() -> Vec<&'static str> {
        Self::off_policy().entries().into_iter().map(|(k, _)| k).collect()
    }

    /// Sets one key from its text form. Errors name the key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "env" => self.env = value.to_string(),
            "env.max_steps" => self.env_max_steps = parse_opt(key, value)?,
            "epsilon" => {
                self.epsilon = match value {
                    "inf" | "infinity" | "∞" => Epsilon::Infinite,
                    _ => Epsilon::Finite(parse(key, value)?),
                }
            }
            "lambda" => {
                self.lambda = match value {
                    "auto" => LambdaMode::Auto,
                    _ => LambdaMode::Fixed(parse(key, value)?),
                }
            }
            "lambda.initial" => self.lambda_initial = parse(key, value)?,
            "prior" => {
                self.prior = match value {
                    "lagged" => PriorMode::Lagged,
                    "uniform" => PriorMode::Uniform,
                    _ => return Err(invalid(key, value, "expected lagged or uniform")),
                }
            }
            "d" => self.d = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "collect_steps" => self.collect_steps = parse(key, value)?,
            "batch_transitions" => self.batch_transitions = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "lr.policy" => self.lr_policy = parse(key, value)?,
            "lr.value" => self.lr_value = parse(key, value)?,
            "tau" => self.tau = TauSchedule::constant(parse(key, value)?),
            "tau.schedule" => {
                self.tau.decay = match value {
                    "constant" => false,
                    "decay" => true,
                    _ => return Err(invalid(key, value, "expected constant or decay")),
                }
            }
            "tau.initial" => self.tau.initial = parse(key, value)?,
            "tau.decay_factor" => self.tau.factor = parse(key, value)?,
            "tau.decay_every" => self.tau.every = parse(key, value)?,
            "steps" => self.steps = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "eval.interval" => self.eval_interval = parse(key, value)?,
            "eval.episodes" => self.eval_episodes = parse(key, value)?,
            "value_steps" => self.value_steps = parse(key, value)?,
            "huber_delta" => self.huber_delta = parse(key, value)?,
            "buffer_capacity" => self.buffer_capacity = parse(key, value)?,
            "model.hidden" => {
                self.hidden = if value.is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|h| parse(key, h.trim()))
                        .collect::<Result<Vec<usize>>>()?
                }
            }
            "model.init_log_std" => self.init_log_std = parse(key, value)?,
            "stop.eval_return" => self.stop_eval_return = parse_opt(key, value)?,
            "wall_clock" => self.wall_clock = parse(key, value)?,
            _ => return Err(Error::Config(format!("{key}: unknown key"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are skipped;
    /// a `preset` line, wherever it appears, selects the starting point.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected key = value, got {line:?}", n + 1)));
            };
            entries.push((key.trim().to_string(), value.trim().to_string()));
        }
        let mut config = match entries.iter().rev().find(|(k, _)| k == "preset") {
            Some((_, name)) => Self::preset(name)?,
            None => Self::off_policy(),
        };
        for (key, value) in entries.iter().filter(|(k, _)| k != "preset") {
            config.set(key, value)?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Canonical text form; [`TrainConfig::from_text`] reads it back exactly.
    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Checks every constraint; errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, msg: String| Err(Error::Config(format!("{key}: {msg}")));
        if self.env.is_empty() {
            return fail("env", "must not be empty".into());
        }
        if self.env_max_steps == Some(0) {
            return fail("env.max_steps", "must be >= 1".into());
        }
        if let Epsilon::Finite(e) = self.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return fail("epsilon", format!("must be > 0, got {e}"));
            }
        }
        if let LambdaMode::Fixed(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return fail("lambda", format!("must be >= 0, got {l}"));
            }
        }
        if !(1e-4..=1e4).contains(&self.lambda_initial) {
            return fail("lambda.initial", format!("must lie in [1e-4, 1e4], got {}", self.lambda_initial));
        }
        if self.d == 0 {
            return fail("d", "must be >= 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail("gamma", format!("must lie in (0, 1], got {}", self.gamma));
        }
        if self.collect_steps == 0 {
            return fail("collect_steps", "must be >= 1".into());
        }
        if self.batch_transitions < self.collect_steps {
            return fail(
                "batch_transitions",
                format!("must be >= collect_steps ({})", self.collect_steps),
            );
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail("alpha", format!("must lie in [0, 1], got {}", self.alpha));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return fail("beta", format!("must be >= 0, got {}", self.beta));
        }
        for (key, lr) in [("lr.policy", self.lr_policy), ("lr.value", self.lr_value)] {
            if !(lr >= 0.0 && lr.is_finite()) {
                return fail(key, format!("must be >= 0, got {lr}"));
            }
        }
        if !(self.tau.initial >= 0.0 && self.tau.initial.is_finite()) {
            return fail("tau.initial", format!("must be >= 0, got {}", self.tau.initial));
        }
        if !(self.tau.factor > 0.0 && self.tau.factor <= 1.0) {
            return fail("tau.decay_factor", format!("must lie in (0, 1], got {}", self.tau.factor));
        }
        if !(self.tau.every > 0.0) {
            return fail("tau.decay_every", format!("must be > 0, got {}", self.tau.every));
        }
        if self.eval_interval == 0 {
            return fail("eval.interval", "must be >= 1".into());
        }
        if self.eval_episodes == 0 {
            return fail("eval.episodes", "must be >= 1".into());
        }
        if self.value_steps == 0 {
            return fail("value_steps", "must be >= 1".into());
        }
        if !(self.huber_delta > 0.0) {
            return fail("huber_delta", format!("must be > 0, got {}", self.huber_delta));
        }
        if self.buffer_capacity == 0 {
            return fail("buffer_capacity", "must be >= 1".into());
        }
        if !self.init_log_std.is_finite() {
            return fail("model.init_log_std", "must be finite".into());
        }
        Ok(())
    }
}

fn invalid(key: &str, value: &str, why: &str) -> Error {
    Error::Config(format!("{key}: invalid value {value:?} ({why})"))
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value.parse().map_err(|e: T::Err| invalid(key, value, &e.to_string()))
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>>
where
    T::Err: Display,
{
    match value {
        "" | "none" | "default" => Ok(None),
        _ => parse(key, value).map(Some),
    }
}
