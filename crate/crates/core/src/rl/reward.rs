use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Mean of the last `k` horizon-normalized returns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnTracker {
    capacity: usize,
    returns: VecDeque<f64>,
}

pub const TRACKER_CAPACITY: usize = 3;

impl Default for ReturnTracker {
    fn default() -> Self {
        ReturnTracker::new(TRACKER_CAPACITY).expect("positive capacity")
    }
}

impl ReturnTracker {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("tracker capacity must be positive".into()));
        }
        Ok(ReturnTracker {
            capacity,
            returns: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn push(&mut self, value: f64) {
        if self.returns.len() == self.capacity {
            self.returns.pop_front();
        }
        self.returns.push_back(value);
    }

    /// Zero while empty.
    pub fn mean(&self) -> f64 {
        if self.returns.is_empty() {
            0.0
        } else {
            self.returns.iter().sum::<f64>() / self.returns.len() as f64
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.returns.iter().copied()
    }
}

/// `tanh((r - r') / 10)` with `r'` the tracker mean.
/// Largest double below one; tanh rounds to exactly 1 past about 19.
const OPEN_BOUND: f64 = 1.0 - f64::EPSILON / 2.0;

pub fn transform_reward(r_tilde: f64, tracker: &ReturnTracker) -> f64 {
    ((r_tilde - tracker.mean()) / 10.0).tanh().clamp(-OPEN_BOUND, OPEN_BOUND)
}

pub fn compose_reward(r_task: f64, energy: f64, w_task: f64, w_energy: f64) -> f64 {
    w_task * r_task + w_energy * energy
}

/// Weights of the composed reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardWeights {
    pub task: f64,
    pub learned: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights { task: 0.5, learned: 0.5 }
    }
}

impl RewardWeights {
    pub fn learned_only() -> Self {
        RewardWeights { task: 0.0, learned: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.task >= 0.0 && self.learned >= 0.0 && self.task.is_finite() && self.learned.is_finite()) {
            return Err(Error::InvalidArgument("reward weights must be non-negative".into()));
        }
        Ok(())
    }

    pub fn compose(&self, r_task: f64, learned: f64) -> f64 {
        compose_reward(r_task, learned, self.task, self.learned)
    }
}
