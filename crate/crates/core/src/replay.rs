//! Fixed-capacity FIFO experience store with uniform sampling.

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::stack_rows;

/// One environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    /// Squashed action in `[-1, 1]^d`.
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    /// The episode ended at this step, for whatever reason.
    pub done: bool,
    /// The episode ended because of the step limit, not a true terminal.
    pub truncated: bool,
}

impl Transition {
    /// True terminal state: no bootstrapping past it.
    pub fn terminal(&self) -> bool {
        self.done && !self.truncated
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    items: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("replay capacity must be positive"));
        }
        Ok(ReplayBuffer {
            capacity,
            obs_dim,
            act_dim,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Append, evicting the oldest item once full.
    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.obs.len() != self.obs_dim || t.next_obs.len() != self.obs_dim || t.action.len() != self.act_dim {
            return Err(Error::config(format!(
                "transition dims (obs {}, next {}, act {}) do not match buffer ({}, {})",
                t.obs.len(),
                t.next_obs.len(),
                t.action.len(),
                self.obs_dim,
                self.act_dim
            )));
        }
        if !t.reward.is_finite() {
            return Err(Error::numerical("replay push", format!("reward {}", t.reward)));
        }
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Contents from oldest to newest.
    pub fn iter_fifo(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity {
            0
        } else {
            self.cursor
        };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    /// `n` independent uniform draws with replacement. A single stored
    /// item can fill any batch.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if n == 0 || self.items.is_empty() {
            return Err(Error::contract(format!(
                "cannot sample {n} transitions from a buffer holding {}",
                self.items.len()
            )));
        }
        Ok((0..n)
            .map(|_| &self.items[rng.gen_range(0..self.items.len())])
            .collect())
    }

    pub fn sample_batch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Batch> {
        Ok(Batch::from_transitions(&self.sample(n, rng)?))
    }
}

/// Column-stacked view of sampled transitions.
#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub act: Array2<f64>,
    pub reward: Vec<f64>,
    pub next_obs: Array2<f64>,
    pub terminal: Vec<bool>,
}

impl Batch {
    pub fn from_transitions(ts: &[&Transition]) -> Self {
        let obs_dim = ts.first().map_or(0, |t| t.obs.len());
        let act_dim = ts.first().map_or(0, |t| t.action.len());
        Batch {
            obs: stack_rows(ts.iter().map(|t| t.obs.as_slice()), obs_dim),
            act: stack_rows(ts.iter().map(|t| t.action.as_slice()), act_dim),
            reward: ts.iter().map(|t| t.reward).collect(),
            next_obs: stack_rows(ts.iter().map(|t| t.next_obs.as_slice()), obs_dim),
            terminal: ts.iter().map(|t| t.terminal()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.reward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reward.is_empty()
    }
}
