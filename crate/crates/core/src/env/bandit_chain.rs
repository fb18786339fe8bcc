//! Three-state deterministic chain with a noisy quadratic reward.
//!
//! States are visited in order 0, 1, 2 and the episode ends (true terminal)
//! after the third action. Observations are one-hot state indicators.
//! Reward in state `s` is `-(a - a*_s)^2 + eta` with `eta ~ N(0, nu^2)`.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use super::{EnvSpec, Environment, StepInfo, StepOutcome};
use crate::rng::{self, Rng};

pub const NUM_STATES: usize = 3;
pub const DEFAULT_OPTIMA: [f64; NUM_STATES] = [0.5, -0.3, 0.2];

#[derive(Debug, Clone)]
pub struct BanditChain {
    pub optima: [f64; NUM_STATES],
    pub noise_std: f64,
    pub state: usize,
    noise: Rng,
}

impl BanditChain {
    pub fn new(noise_std: f64) -> Self {
        BanditChain {
            optima: DEFAULT_OPTIMA,
            noise_std,
            state: 0,
            noise: Rng::seed_from_u64(0),
        }
    }

    pub fn one_hot(state: usize) -> Vec<f64> {
        let mut v = vec![0.0; NUM_STATES];
        if state < NUM_STATES {
            v[state] = 1.0;
        }
        v
    }

    /// State index of a one-hot observation; `None` for the terminal
    /// (all-zero) observation.
    pub fn state_of(obs: &[f64]) -> Option<usize> {
        obs.iter().position(|&v| v > 0.5)
    }

    /// Expected reward, without noise.
    pub fn mean_reward(&self, state: usize, a: f64) -> f64 {
        let d = a - self.optima[state];
        -d * d
    }

    /// Place the chain in `state` without touching the noise stream.
    pub fn set_state(&mut self, state: usize) {
        self.state = state;
    }
}

impl Environment for BanditChain {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            name: "noisy-bandit-chain".into(),
            obs_dim: NUM_STATES,
            act_dim: 1,
            max_episode_steps: NUM_STATES,
            action_scale: vec![1.0],
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.state = 0;
        self.noise = rng::stream(seed, "bandit-noise");
        self.observe()
    }

    fn observe(&self) -> Vec<f64> {
        BanditChain::one_hot(self.state)
    }

    fn step(&mut self, action: &[f64]) -> StepOutcome {
        let a = action[0].clamp(-1.0, 1.0);
        let eta: f64 = StandardNormal.sample(&mut self.noise);
        let reward = self.mean_reward(self.state, a) + self.noise_std * eta;
        self.state += 1;
        let done = self.state >= NUM_STATES;
        StepOutcome {
            obs: self.observe(),
            reward,
            done,
            truncated: false,
            info: StepInfo::default(),
        }
    }

    fn reseed_noise(&mut self, seed: u64) {
        self.noise = rng::stream(seed, "bandit-noise");
    }

    fn fixture(&self) -> serde_json::Value {
        json!({
            "states": NUM_STATES,
            "optimal_actions": self.optima,
            "noise_std": self.noise_std,
            "reward": "-(a - a*_s)^2 + N(0, noise_std^2)",
            "terminal_after": NUM_STATES,
        })
    }
}
