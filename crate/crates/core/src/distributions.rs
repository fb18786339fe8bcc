//! Gaussian value-distribution head and tanh-squashed Gaussian policy head.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Lower bound added to the softplus spread of every value distribution.
pub const SIGMA_MIN: f64 = 1e-4;
pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Guard inside `ln(1 - tanh(u)^2 + EPS_TANH)`.
pub const EPS_TANH: f64 = 1e-6;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Log-density of `N(mean, std^2)` at `y`.
pub fn gaussian_logpdf(y: f64, mean: f64, std: f64) -> Result<f64> {
    if !(std > 0.0) {
        return Err(Error::contract(format!(
            "standard deviation must be positive, got {std}"
        )));
    }
    let d = y - mean;
    Ok(-(d * d) / (2.0 * std * std) - std.ln() - HALF_LN_2PI)
}

pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean and standard deviation of a Gaussian soft-return distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueDistParams {
    pub q: f64,
    pub sigma: f64,
}

/// Map the two raw critic outputs to `(Q, sigma)`.
pub fn value_head(raw_mean: f64, raw_spread: f64) -> ValueDistParams {
    ValueDistParams {
        q: raw_mean,
        sigma: softplus(raw_spread) + SIGMA_MIN,
    }
}

/// `d sigma / d raw_spread`.
pub fn value_head_spread_grad(raw_spread: f64) -> f64 {
    sigmoid(raw_spread)
}

/// Draw `Q + sigma * noise` for standard-normal `noise`.
pub fn sample_value(dist: ValueDistParams, noise: f64) -> f64 {
    dist.q + dist.sigma * noise
}

/// Pre-squash diagonal Gaussian of the policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDistParams {
    pub mu: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl PolicyDistParams {
    /// Split raw actor outputs `[mu | log_std]` and clamp the log-std.
    ///
    /// The returned mask is `true` where the clamp was inactive, i.e. where
    /// gradients flow through the log-std channel.
    pub fn from_raw(raw: &[f64]) -> (Self, Vec<bool>) {
        let d = raw.len() / 2;
        let mu = raw[..d].to_vec();
        let mut active = Vec::with_capacity(d);
        let log_std = raw[d..]
            .iter()
            .map(|&l| {
                active.push((LOG_STD_MIN..=LOG_STD_MAX).contains(&l));
                l.clamp(LOG_STD_MIN, LOG_STD_MAX)
            })
            .collect();
        (PolicyDistParams { mu, log_std }, active)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Deterministic action `tanh(mu)`.
    pub fn mode(&self) -> Vec<f64> {
        self.mu.iter().map(|m| m.tanh()).collect()
    }
}

/// Reparameterized draw: `u = mu + exp(log_std) * noise`, `a = tanh(u)`.
pub fn policy_sample(dist: &PolicyDistParams, noise: &[f64]) -> (Vec<f64>, Vec<f64>) {
    debug_assert_eq!(noise.len(), dist.dim());
    let u: Vec<f64> = dist
        .mu
        .iter()
        .zip(&dist.log_std)
        .zip(noise)
        .map(|((m, l), n)| m + l.exp() * n)
        .collect();
    let a = u.iter().map(|v| v.tanh()).collect();
    (u, a)
}

/// Log-density of the squashed action `tanh(u)`, including the change of
/// variables correction.
pub fn policy_logprob(dist: &PolicyDistParams, u: &[f64]) -> f64 {
    dist.mu
        .iter()
        .zip(&dist.log_std)
        .zip(u)
        .map(|((&m, &l), &u)| {
            let std = l.exp();
            let d = (u - m) / std;
            let gauss = -0.5 * d * d - l - HALF_LN_2PI;
            let t = u.tanh();
            gauss - (1.0 - t * t + EPS_TANH).ln()
        })
        .sum()
}

/// `d/du` of the squash correction `-ln(1 - tanh(u)^2 + EPS_TANH)`.
pub fn squash_correction_grad(u: f64) -> f64 {
    let t = u.tanh();
    let sech2 = 1.0 - t * t;
    2.0 * t * sech2 / (sech2 + EPS_TANH)
}

/// `ln(2 pi) / 2`, exposed for oracles.
pub fn half_ln_2pi() -> f64 {
    0.5 * (2.0 * PI).ln()
}
