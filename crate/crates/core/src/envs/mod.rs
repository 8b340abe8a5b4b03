//! Deterministic desk-scale environments.
//!
//! Every environment separates true termination from the time-limit cutoff:
//! [`StepResult::terminal`] means the episode ended in an absorbing state,
//! [`StepResult::timeout`] means it was cut off at `max_steps`. The two are
//! never set together.

mod chain;
mod pendulum;
mod point_mass;

pub use chain::{ChainEnv, ChainTable, NextState};
pub use pendulum::Pendulum;
pub use point_mass::PointMass;

use crate::models::Action;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ActionKind {
    /// Box-bounded continuous actions; out-of-range inputs are clamped.
    Continuous { low: Vec<f64>, high: Vec<f64> },
    Discrete { count: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub action: ActionKind,
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
    pub timeout: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminal || self.timeout
    }
}

pub trait Environment: Send {
    fn spec(&self) -> EnvSpec;

    /// Starts a new episode. The initial state is a pure function of `seed`.
    fn reset(&mut self, seed: u64) -> Vec<f64>;

    /// Advances one step. Stepping a finished (or never reset) episode is a
    /// usage error.
    fn step(&mut self, action: &Action) -> Result<StepResult>;
}

/// Builds an environment from its id.
///
/// Known ids: `point-mass`, `pendulum`, `chain6` (built-in six-state chain),
/// and `chain:<path>` for a chain table in JSON. `max_steps` overrides the
/// default episode cutoff.
pub fn make_env(id: &str, max_steps: Option<usize>) -> Result<Box<dyn Environment>> {
    if max_steps == Some(0) {
        return Err(Error::Config("env.max_steps must be >= 1".into()));
    }
    let env: Box<dyn Environment> = match id {
        "point-mass" => Box::new(PointMass::new(max_steps.unwrap_or(PointMass::DEFAULT_MAX_STEPS))),
        "pendulum" => Box::new(Pendulum::new(max_steps.unwrap_or(Pendulum::DEFAULT_MAX_STEPS))),
        _ => Box::new(ChainEnv::new(load_chain_table(id)?, max_steps)?),
    };
    Ok(env)
}

/// Resolves `chain6` or `chain:<path>` to a table.
pub fn load_chain_table(id: &str) -> Result<ChainTable> {
    match id {
        "chain6" => Ok(ChainTable::chain6()),
        _ => match id.strip_prefix("chain:") {
            Some(path) => ChainTable::load(std::path::Path::new(path)),
            None => Err(Error::Config(format!("unknown env id {id:?}"))),
        },
    }
}

/// Step counter shared by the environments.
#[derive(Debug, Clone)]
struct EpisodeClock {
    max_steps: usize,
    t: usize,
    active: bool,
}

impl EpisodeClock {
    fn new(max_steps: usize) -> Self {
        Self {
            max_steps,
            t: 0,
            active: false,
        }
    }

    fn start(&mut self) {
        self.t = 0;
        self.active = true;
    }

    fn ensure_active(&self) -> Result<()> {
        if self.active {
            Ok(())
        } else {
            Err(Error::Usage("step called on a finished or unstarted episode; call reset".into()))
        }
    }

    /// Records one step and returns the `(terminal, timeout)` flags.
    fn tick(&mut self, terminal: bool) -> (bool, bool) {
        self.t += 1;
        let timeout = !terminal && self.t >= self.max_steps;
        if terminal || timeout {
            self.active = false;
        }
        (terminal, timeout)
    }
}

fn continuous_action(action: &Action, dim: usize) -> Result<&[f64]> {
    match action {
        Action::Continuous(a) if a.len() == dim => Ok(a),
        Action::Continuous(a) => Err(Error::Shape {
            context: "environment action",
            expected: dim,
            actual: a.len(),
        }),
        Action::Discrete(_) => Err(Error::Usage("continuous environment given a discrete action".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factory_ids() {
        assert_eq!(make_env("point-mass", None).unwrap().spec().obs_dim, 4);
        assert_eq!(make_env("pendulum", None).unwrap().spec().obs_dim, 3);
        assert_eq!(
            make_env("chain6", None).unwrap().spec().action,
            ActionKind::Discrete { count: 2 }
        );
        assert!(matches!(make_env("cartpole", None), Err(Error::Config(_))));
        assert!(make_env("point-mass", Some(0)).is_err());
        assert_eq!(make_env("pendulum", Some(7)).unwrap().spec().max_steps, 7);
    }

    #[test]
    fn timeout_fires_exactly_at_cutoff() {
        let mut env = make_env("pendulum", Some(5)).unwrap();
        env.reset(1);
        for t in 1..=5 {
            let r = env.step(&Action::Continuous(vec![0.0])).unwrap();
            assert!(!r.terminal);
            assert_eq!(r.timeout, t == 5);
        }
        assert!(matches!(env.step(&Action::Continuous(vec![0.0])), Err(Error::Usage(_))));
    }

    #[test]
    fn same_seed_same_trajectory() {
        for id in ["point-mass", "pendulum", "chain6"] {
            let run = || {
                let mut env = make_env(id, None).unwrap();
                let mut trace = vec![env.reset(77)];
                for k in 0..30 {
                    let a = match env.spec().action {
                        ActionKind::Continuous { low, .. } => {
                            Action::Continuous(low.iter().map(|_| ((k as f64) * 0.37).sin()).collect())
                        }
                        ActionKind::Discrete { count } => Action::Discrete(k % count),
                    };
                    let r = env.step(&a).unwrap();
                    let done = r.done();
                    let mut row = r.obs.clone();
                    row.push(r.reward);
                    trace.push(row);
                    if done {
                        break;
                    }
                }
                trace
            };
            let (a, b) = (run(), run());
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(
                    x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                    y.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
                );
            }
        }
    }

    #[test]
    fn step_before_reset_is_usage_error() {
        let mut env = make_env("chain6", None).unwrap();
        assert!(matches!(env.step(&Action::Discrete(0)), Err(Error::Usage(_))));
    }
}
