//! Built-in continuous-control tasks.

pub mod bandit_chain;
pub mod pendulum;
pub mod point_robot;

pub use bandit_chain::{BanditChain, DEFAULT_OPTIMA, NUM_STATES};
pub use pendulum::{normalize_angle, Pendulum};
pub use point_robot::{collides, reference_controller, Obstacle, PointRobot};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub max_episode_steps: usize,
    /// Physical units per unit action, per dimension.
    pub action_scale: Vec<f64>,
}

/// Task-specific diagnostics attached to a step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepInfo {
    pub collision: bool,
    pub tracking_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

/// Gym-style episodic interface. Actions are in `[-1, 1]^d` and are
/// clamped if outside.
pub trait Environment {
    fn spec(&self) -> EnvSpec;
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    fn observe(&self) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> StepOutcome;
    /// Replace the stream driving stochastic rewards; deterministic tasks
    /// ignore it.
    fn reseed_noise(&mut self, _seed: u64) {}
    /// Every fixture constant, for run provenance.
    fn fixture(&self) -> serde_json::Value;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvName {
    #[serde(rename = "pendulum-swingup")]
    Pendulum,
    #[serde(rename = "point-robot-track")]
    PointRobot,
    #[serde(rename = "noisy-bandit-chain")]
    BanditChain,
}

/// Environment selection plus optional overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub name: EnvName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_episode_steps: Option<usize>,
    /// Reward noise standard deviation of the bandit chain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
}

impl EnvConfig {
    pub fn named(name: EnvName) -> Self {
        EnvConfig {
            name,
            max_episode_steps: None,
            noise_std: None,
        }
    }

    pub fn build(&self) -> Result<Env> {
        if self.max_episode_steps == Some(0) {
            return Err(Error::config("max_episode_steps must be at least 1"));
        }
        Ok(match self.name {
            EnvName::Pendulum => {
                Env::Pendulum(Pendulum::new(self.max_episode_steps.unwrap_or(pendulum::EPISODE_STEPS)))
            }
            EnvName::PointRobot => Env::PointRobot(PointRobot::new(
                self.max_episode_steps.unwrap_or(point_robot::EPISODE_STEPS),
            )),
            EnvName::BanditChain => {
                if self.max_episode_steps.is_some() {
                    return Err(Error::config("the bandit chain has a fixed length"));
                }
                let nu = self.noise_std.unwrap_or(0.3);
                if !(nu >= 0.0 && nu.is_finite()) {
                    return Err(Error::config("noise_std must be non-negative"));
                }
                Env::BanditChain(BanditChain::new(nu))
            }
        })
    }
}

/// Any built-in environment.
#[derive(Debug, Clone)]
pub enum Env {
    Pendulum(Pendulum),
    PointRobot(PointRobot),
    BanditChain(BanditChain),
}

macro_rules! dispatch {
    ($self:expr, $e:ident => $body:expr) => {
        match $self {
            Env::Pendulum($e) => $body,
            Env::PointRobot($e) => $body,
            Env::BanditChain($e) => $body,
        }
    };
}

impl Environment for Env {
    fn spec(&self) -> EnvSpec {
        dispatch!(self, e => e.spec())
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        dispatch!(self, e => e.reset(seed))
    }

    fn observe(&self) -> Vec<f64> {
        dispatch!(self, e => e.observe())
    }

    fn step(&mut self, action: &[f64]) -> StepOutcome {
        dispatch!(self, e => e.step(action))
    }

    fn reseed_noise(&mut self, seed: u64) {
        dispatch!(self, e => e.reseed_noise(seed))
    }

    fn fixture(&self) -> serde_json::Value {
        dispatch!(self, e => e.fixture())
    }
}
