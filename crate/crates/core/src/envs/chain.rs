use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{ActionKind, EnvSpec, Environment, EpisodeClock, StepResult};
use crate::models::Action;
use crate::{seeded_rng, Error, Result, Rng};

/// Next-state entry of a chain table: either a state index or a full
/// distribution over next states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NextState {
    Index(usize),
    Distribution(Vec<f64>),
}

impl NextState {
    /// Dense distribution over `num_states` next states.
    pub fn to_distribution(&self, num_states: usize) -> Vec<f64> {
        match self {
            NextState::Index(s) => {
                let mut p = vec![0.0; num_states];
                p[*s] = 1.0;
                p
            }
            NextState::Distribution(p) => p.clone(),
        }
    }
}

/// Tabular MDP description shared by the chain environment and the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTable {
    pub num_states: usize,
    pub num_actions: usize,
    pub transitions: Vec<Vec<NextState>>,
    pub rewards: Vec<Vec<f64>>,
    pub horizon: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub initial_state: usize,
}

fn default_gamma() -> f64 {
    0.9
}

impl ChainTable {
    /// Six states in a row, actions `0 = left`, `1 = right`. Moving right
    /// from the last state pays 1.0 and stays put; moving left from the first
    /// state pays 0.1 and stays put; everything else pays 0.
    pub fn chain6() -> Self {
        let n: usize = 6;
        let transitions = (0..n)
            .map(|s| vec![NextState::Index(s.saturating_sub(1)), NextState::Index((s + 1).min(n - 1))])
            .collect();
        let mut rewards = vec![vec![0.0; 2]; n];
        rewards[0][0] = 0.1;
        rewards[n - 1][1] = 1.0;
        Self {
            num_states: n,
            num_actions: 2,
            transitions,
            rewards,
            horizon: 20,
            gamma: 0.9,
            initial_state: 0,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let table: Self = serde_json::from_str(&text)?;
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, k) = (self.num_states, self.num_actions);
        if n == 0 || k == 0 {
            return Err(Error::Config("chain table needs at least one state and one action".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("chain table horizon must be >= 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("chain table gamma {} outside (0, 1]", self.gamma)));
        }
        if self.initial_state >= n {
            return Err(Error::Config(format!("initial_state {} out of range", self.initial_state)));
        }
        if self.transitions.len() != n || self.rewards.len() != n {
            return Err(Error::Config("transitions and rewards need one row per state".into()));
        }
        for s in 0..n {
            if self.transitions[s].len() != k || self.rewards[s].len() != k {
                return Err(Error::Config(format!("state {s}: expected {k} actions")));
            }
            for (a, next) in self.transitions[s].iter().enumerate() {
                match next {
                    NextState::Index(t) if *t >= n => {
                        return Err(Error::Config(format!("transitions[{s}][{a}] = {t} out of range")));
                    }
                    NextState::Distribution(p) => {
                        let total: f64 = p.iter().sum();
                        if p.len() != n || p.iter().any(|x| !(*x >= 0.0)) || (total - 1.0).abs() > 1e-12 {
                            return Err(Error::Config(format!(
                                "transitions[{s}][{a}] is not a distribution over {n} states"
                            )));
                        }
                    }
                    NextState::Index(_) => {}
                }
                if !self.rewards[s][a].is_finite() {
                    return Err(Error::Config(format!("rewards[{s}][{a}] is not finite")));
                }
            }
        }
        Ok(())
    }

    pub fn one_hot(&self, state: usize) -> Vec<f64> {
        let mut obs = vec![0.0; self.num_states];
        obs[state] = 1.0;
        obs
    }
}

/// Chain MDP environment over a [`ChainTable`], one-hot observations. The
/// table's horizon is the time-limit cutoff; there are no absorbing states.
#[derive(Debug, Clone)]
pub struct ChainEnv {
    table: ChainTable,
    state: usize,
    rng: Rng,
    clock: EpisodeClock,
}

impl ChainEnv {
    pub fn new(table: ChainTable, max_steps: Option<usize>) -> Result<Self> {
        table.validate()?;
        let clock = EpisodeClock::new(max_steps.unwrap_or(table.horizon));
        Ok(Self {
            state: table.initial_state,
            rng: seeded_rng(0),
            clock,
            table,
        })
    }

    pub fn table(&self) -> &ChainTable {
        &self.table
    }

    pub fn state(&self) -> usize {
        self.state
    }
}

impl Environment for ChainEnv {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            obs_dim: self.table.num_states,
            action: ActionKind::Discrete {
                count: self.table.num_actions,
            },
            max_steps: self.clock.max_steps,
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.rng = seeded_rng(seed);
        self.state = self.table.initial_state;
        self.clock.start();
        self.table.one_hot(self.state)
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        self.clock.ensure_active()?;
        let a = match action {
            Action::Discrete(a) if *a < self.table.num_actions => *a,
            Action::Discrete(a) => {
                return Err(Error::Usage(format!(
                    "action {a} out of range for {} actions",
                    self.table.num_actions
                )))
            }
            Action::Continuous(_) => return Err(Error::Usage("chain environment given a continuous action".into())),
        };
        let reward = self.table.rewards[self.state][a];
        self.state = match &self.table.transitions[self.state][a] {
            NextState::Index(t) => *t,
            NextState::Distribution(p) => {
                let u: f64 = self.rng.random();
                let mut acc = 0.0;
                let mut next = p.len() - 1;
                for (t, q) in p.iter().enumerate() {
                    acc += q;
                    if u < acc {
                        next = t;
                        break;
                    }
                }
                next
            }
        };
        let (terminal, timeout) = self.clock.tick(false);
        Ok(StepResult {
            obs: self.table.one_hot(self.state),
            reward,
            terminal,
            timeout,
        })
    }
}
