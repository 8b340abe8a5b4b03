//! Recency-prioritized segment replay and the rolling episode log.

use std::collections::VecDeque;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::models::Action;
use crate::{Error, Result, Rng};

/// One environment step as recorded at collection time.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    /// Log-density of `action` under the behaviour policy; diagnostics only.
    pub log_prob: f64,
    pub terminal: bool,
    pub timeout: bool,
}

impl Transition {
    pub fn ends_episode(&self) -> bool {
        self.terminal || self.timeout
    }
}

/// Contiguous piece of one episode: the replay storage unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub episode_id: u64,
    /// Index of the first transition within its episode.
    pub start_index: usize,
    pub transitions: Vec<Transition>,
    /// Observation following the last transition.
    pub next_obs: Vec<f64>,
    pub priority: f64,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Episode index one past the last transition.
    pub fn end_index(&self) -> usize {
        self.start_index + self.transitions.len()
    }

    /// Whether the segment closes its episode.
    pub fn ends_episode(&self) -> bool {
        self.transitions.last().is_some_and(Transition::ends_episode)
    }

    pub fn validate(&self) -> Result<()> {
        if self.transitions.is_empty() {
            return Err(Error::Usage("segment has no transitions".into()));
        }
        let last = self.transitions.len() - 1;
        for (i, t) in self.transitions.iter().enumerate() {
            if !t.reward.is_finite() {
                return Err(Error::Numeric(format!("segment transition {i} has non-finite reward")));
            }
            if t.terminal && t.timeout {
                return Err(Error::Usage(format!("transition {i} is both terminal and timed out")));
            }
            if t.ends_episode() && i != last {
                return Err(Error::Usage(format!("episode end at transition {i} is not the segment end")));
            }
        }
        Ok(())
    }
}

/// Bounded FIFO store of segments, sampled with probability
/// `∝ exp(β·(p_i − max_j p_j))`.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    beta: f64,
    segments: VecDeque<Segment>,
}

impl ReplayBuffer {
    pub const DEFAULT_CAPACITY: usize = 5000;

    pub fn new(capacity: usize, beta: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("buffer_capacity must be >= 1".into()));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!("beta must be finite and >= 0, got {beta}")));
        }
        Ok(Self {
            capacity,
            beta,
            segments: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Transitions held across all stored segments.
    pub fn num_transitions(&self) -> usize {
        self.segments.iter().map(Segment::len).sum()
    }

    pub fn get(&self, index: usize) -> Option<&Segment> {
        self.segments.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter()
    }

    /// Stores `segment` with priority `train_step`, evicting the oldest
    /// segment when full.
    pub fn insert(&mut self, mut segment: Segment, train_step: u64) -> Result<()> {
        segment.validate()?;
        segment.priority = train_step as f64;
        if self.segments.len() == self.capacity {
            self.segments.pop_front();
        }
        self.segments.push_back(segment);
        Ok(())
    }

    /// Sampling probability of each stored segment, in storage order.
    pub fn probabilities(&self) -> Vec<f64> {
        let weights = self.weights();
        let total: f64 = weights.iter().sum();
        weights.into_iter().map(|w| w / total).collect()
    }

    fn weights(&self) -> Vec<f64> {
        let max = self
            .segments
            .iter()
            .map(|s| s.priority)
            .fold(f64::NEG_INFINITY, f64::max);
        self.segments
            .iter()
            .map(|s| (self.beta * (s.priority - max)).exp())
            .collect()
    }

    /// Draws `ceil(Q/P)` segment indices i.i.d. with replacement.
    pub fn sample_indices(&self, total_transitions: usize, segment_length: usize, rng: &mut Rng) -> Result<Vec<usize>> {
        if self.segments.is_empty() {
            return Err(Error::Usage("cannot sample from an empty replay buffer".into()));
        }
        if segment_length == 0 {
            return Err(Error::Config("segment length must be >= 1".into()));
        }
        let count = total_transitions.div_ceil(segment_length);
        let dist = WeightedIndex::new(self.weights())
            .map_err(|e| Error::Numeric(format!("replay weights: {e}")))?;
        Ok((0..count).map(|_| dist.sample(rng)).collect())
    }

    /// Draws `ceil(Q/P)` segments i.i.d. with replacement.
    pub fn sample_batch(&self, total_transitions: usize, segment_length: usize, rng: &mut Rng) -> Result<Vec<&Segment>> {
        Ok(self
            .sample_indices(total_transitions, segment_length, rng)?
            .into_iter()
            .map(|i| &self.segments[i])
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub total_return: f64,
    pub length: usize,
}

/// The most recent completed episodes, oldest first.
#[derive(Debug, Clone)]
pub struct EpisodeLog {
    capacity: usize,
    records: VecDeque<EpisodeRecord>,
}

impl Default for EpisodeLog {
    fn default() -> Self {
        Self::new(Self::DEFAULT_CAPACITY)
    }
}

impl EpisodeLog {
    pub const DEFAULT_CAPACITY: usize = 100;

    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            records: VecDeque::with_capacity(capacity.max(1)),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.records.iter()
    }

    pub fn log_episode(&mut self, total_return: f64, length: usize) -> Result<()> {
        if length == 0 {
            return Err(Error::Usage("episode length must be >= 1".into()));
        }
        if !total_return.is_finite() {
            return Err(Error::Numeric(format!("episode return {total_return} is not finite")));
        }
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(EpisodeRecord { total_return, length });
        Ok(())
    }

    pub fn returns(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.total_return).collect()
    }

    pub fn mean_length(&self) -> Result<f64> {
        if self.records.is_empty() {
            return Err(Error::InsufficientData("episode log is empty".into()));
        }
        let total: usize = self.records.iter().map(|r| r.length).sum();
        Ok(total as f64 / self.records.len() as f64)
    }

    pub fn mean_return(&self) -> Result<f64> {
        if self.records.is_empty() {
            return Err(Error::InsufficientData("episode log is empty".into()));
        }
        Ok(self.records.iter().map(|r| r.total_return).sum::<f64>() / self.records.len() as f64)
    }
}
