//! Pendulum swing-up with the classic Gym constants.

use std::f64::consts::PI;

use rand::Rng;
use serde_json::json;

use super::{EnvSpec, Environment, StepInfo, StepOutcome};
use crate::rng;

pub const GRAVITY: f64 = 10.0;
pub const MASS: f64 = 1.0;
pub const LENGTH: f64 = 1.0;
pub const DT: f64 = 0.05;
pub const MAX_SPEED: f64 = 8.0;
pub const MAX_TORQUE: f64 = 2.0;
pub const EPISODE_STEPS: usize = 200;

/// Wrap an angle into `[-pi, pi)`.
pub fn normalize_angle(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Angle `theta` is measured from upright; `theta_dot` in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct Pendulum {
    pub theta: f64,
    pub theta_dot: f64,
    pub steps: usize,
    pub max_steps: usize,
}

impl Default for Pendulum {
    fn default() -> Self {
        Pendulum::new(EPISODE_STEPS)
    }
}

impl Pendulum {
    pub fn new(max_steps: usize) -> Self {
        Pendulum {
            theta: 0.0,
            theta_dot: 0.0,
            steps: 0,
            max_steps,
        }
    }

    /// Force a state, resetting the step counter.
    pub fn set_state(&mut self, theta: f64, theta_dot: f64) {
        self.theta = theta;
        self.theta_dot = theta_dot;
        self.steps = 0;
    }

    pub fn reward(theta: f64, theta_dot: f64, torque: f64) -> f64 {
        let th = normalize_angle(theta);
        -(th * th + 0.1 * theta_dot * theta_dot + 0.001 * torque * torque)
    }

    /// Energy per unit inertia: `theta_dot^2 / 2 + (3g / 2l) cos(theta)`.
    pub fn energy(&self) -> f64 {
        0.5 * self.theta_dot * self.theta_dot + 1.5 * GRAVITY / LENGTH * self.theta.cos()
    }
}

impl Environment for Pendulum {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            name: "pendulum-swingup".into(),
            obs_dim: 3,
            act_dim: 1,
            max_episode_steps: self.max_steps,
            action_scale: vec![MAX_TORQUE],
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, "pendulum-reset");
        self.theta = r.gen_range(-PI..=PI);
        self.theta_dot = r.gen_range(-1.0..=1.0);
        self.steps = 0;
        self.observe()
    }

    fn observe(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }

    fn step(&mut self, action: &[f64]) -> StepOutcome {
        let u = MAX_TORQUE * action[0].clamp(-1.0, 1.0);
        let reward = Pendulum::reward(self.theta, self.theta_dot, u);
        let accel = 1.5 * GRAVITY / LENGTH * self.theta.sin() + 3.0 / (MASS * LENGTH * LENGTH) * u;
        // Velocity first, then position with the new velocity (Gym's update).
        self.theta_dot = (self.theta_dot + DT * accel).clamp(-MAX_SPEED, MAX_SPEED);
        self.theta += DT * self.theta_dot;
        self.steps += 1;
        let truncated = self.steps >= self.max_steps;
        StepOutcome {
            obs: self.observe(),
            reward,
            done: truncated,
            truncated,
            info: StepInfo::default(),
        }
    }

    fn fixture(&self) -> serde_json::Value {
        json!({
            "gravity": GRAVITY,
            "mass": MASS,
            "length": LENGTH,
            "dt": DT,
            "max_speed": MAX_SPEED,
            "max_torque": MAX_TORQUE,
            "episode_steps": self.max_steps,
            "reward": "-(theta_norm^2 + 0.1*theta_dot^2 + 0.001*u^2)",
            "integrator": "semi-implicit Euler",
            "reset": "theta ~ U[-pi, pi], theta_dot ~ U[-1, 1]",
        })
    }
}
