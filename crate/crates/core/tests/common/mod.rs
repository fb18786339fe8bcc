//! Test-side oracles, written from the formulas rather than from the
//! library's kernels.
#![allow(dead_code)]

use dsact::env::{EnvSpec, Environment, StepInfo, StepOutcome};
use dsact::numerics::{Activation, Dense, Mlp, MlpGrads};
use dsact::oracles::finite_diff_grad;
use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use serde_json::json;

pub const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_err(a: &MlpGrads, b: &MlpGrads) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(REL_FLOOR))
        .fold(0.0, f64::max)
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn forward(net: &Mlp, x: ArrayView2<f64>) -> Array2<f64> {
    net.predict(x).unwrap()
}

pub fn concat(obs: &Array2<f64>, act: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate(ndarray::Axis(1), &[obs.view(), act.view()]).unwrap()
}

/// Per-sample targets for a critic gradient check.
#[derive(Debug, Clone, Copy)]
pub struct Target {
    pub y_q: f64,
    pub y_z: f64,
}

/// Central-difference gradient of the linearized critic surrogate
/// `(omega + eps_omega) * mean_i [g_Q,i * Q(x_i) + g_sigma,i * sigma(x_i)]`
/// with the coefficients frozen at the current parameters.
#[allow(clippy::too_many_arguments)]
pub fn critic_fd_oracle(
    net: &Mlp,
    obs: &Array2<f64>,
    act: &Array2<f64>,
    targets: &[Target],
    b: f64,
    scale: f64,
    eps: f64,
    evs: bool,
) -> MlpGrads {
    let x = concat(obs, act);
    let out = forward(net, x.view());
    let n = targets.len();
    let coeffs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let q = out[[i, 0]];
            let sigma = softplus(out[[i, 1]]) + 1e-4;
            let t = targets[i];
            let clipped = t.y_z.clamp(q - b, q + b);
            let mean_target = if evs { t.y_q } else { t.y_z };
            let g_q = -(mean_target - q) / (sigma * sigma + eps);
            let g_s = -((clipped - q).powi(2) - sigma * sigma) / (sigma.powi(3) + eps);
            (g_q, g_s)
        })
        .collect();
    finite_diff_grad(
        |p| {
            let o = forward(p, x.view());
            (0..n)
                .map(|i| scale * (coeffs[i].0 * o[[i, 0]] + coeffs[i].1 * (softplus(o[[i, 1]]) + 1e-4)))
                .sum::<f64>()
                / n as f64
        },
        net,
        FD_STEP,
    )
}

/// Batch-mean sampled actor objective with fixed noise:
/// `mean_i [min_k Q_k(s_i, tanh(u_i)) - alpha * log pi(tanh(u_i) | s_i)]`.
pub fn actor_objective(actor: &Mlp, states: &Array2<f64>, critics: &[&Mlp], alpha: f64, noise: &Array2<f64>) -> f64 {
    let raw = forward(actor, states.view());
    let d = noise.ncols();
    let n = states.nrows();
    let mut acts = Array2::zeros((n, d));
    let mut logp = vec![0.0; n];
    for i in 0..n {
        for j in 0..d {
            let mu = raw[[i, j]];
            let log_std = raw[[i, d + j]].clamp(-20.0, 2.0);
            let z = noise[[i, j]];
            let u = mu + log_std.exp() * z;
            let t = u.tanh();
            acts[[i, j]] = t;
            logp[i] += -0.5 * z * z - log_std - 0.5 * (2.0 * std::f64::consts::PI).ln() - (1.0 - t * t + 1e-6).ln();
        }
    }
    let x = concat(states, &acts);
    let qs: Vec<Array2<f64>> = critics.iter().map(|c| forward(c, x.view())).collect();
    (0..n)
        .map(|i| {
            let q = qs.iter().map(|o| o[[i, 0]]).fold(f64::INFINITY, f64::min);
            q - alpha * logp[i]
        })
        .sum::<f64>()
        / n as f64
}

pub fn actor_fd_oracle(
    actor: &Mlp,
    states: &Array2<f64>,
    critics: &[&Mlp],
    alpha: f64,
    noise: &Array2<f64>,
) -> MlpGrads {
    finite_diff_grad(|p| actor_objective(p, states, critics, alpha, noise), actor, FD_STEP)
}

pub fn random_matrix<R: Rng>(r: &mut R, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || r.gen_range(-scale..scale))
}

/// Net with uniform weights in `[-scale, scale]` (biases included).
pub fn random_net<R: Rng>(r: &mut R, sizes: &[usize], scale: f64) -> Mlp {
    let n = sizes.len() - 1;
    let layers = (0..n)
        .map(|i| Dense {
            weight: random_matrix(r, sizes[i + 1], sizes[i], scale),
            bias: Array1::from_shape_simple_fn(sizes[i + 1], || r.gen_range(-scale..scale)),
            activation: if i + 1 == n {
                Activation::Identity
            } else {
                Activation::Gelu
            },
        })
        .collect();
    Mlp::from_layers(layers).unwrap()
}

/// `x^2` from GELU units: `gelu(e x) + gelu(-e x) = e x erf(e x / sqrt 2)`,
/// which is `sqrt(2/pi) e^2 x^2 (1 + O(e^2 x^2))`.
const SQUARE_EPS: f64 = 1e-3;

/// A critic for the bandit chain that outputs `Q = -(a - a*_s)^2` (to about
/// 1e-7) and constant `sigma`. Input layout: one-hot state then action.
pub fn exact_bandit_critic(optima: [f64; 3], sigma: f64) -> Mlp {
    const OFF: f64 = 40.0;
    let e = SQUARE_EPS;
    let mut w1 = Array2::zeros((6, 4));
    let mut b1 = Array1::zeros(6);
    for s in 0..3 {
        for (k, sign) in [(0, 1.0), (1, -1.0)] {
            let row = 2 * s + k;
            // sign * e * (a - a*_s) - OFF * (1 - onehot_s)
            w1[[row, 3]] = sign * e;
            w1[[row, s]] = OFF;
            b1[row] = -sign * e * optima[s] - OFF;
        }
    }
    let c = -1.0 / ((2.0 / std::f64::consts::PI).sqrt() * e * e);
    let mut w2 = Array2::zeros((2, 6));
    for k in 0..6 {
        w2[[0, k]] = c;
    }
    // Inverse softplus of sigma - 1e-4.
    let target = sigma - 1e-4;
    let raw = target + (-(-target).exp_m1()).ln();
    let b2 = Array1::from(vec![0.0, raw]);
    Mlp::from_layers(vec![
        Dense {
            weight: w1,
            bias: b1,
            activation: Activation::Gelu,
        },
        Dense {
            weight: w2,
            bias: b2,
            activation: Activation::Identity,
        },
    ])
    .unwrap()
}

/// Net whose output is a constant vector.
pub fn constant_net(in_dim: usize, out: &[f64]) -> Mlp {
    Mlp::from_layers(vec![Dense {
        weight: Array2::zeros((out.len(), in_dim)),
        bias: Array1::from(out.to_vec()),
        activation: Activation::Identity,
    }])
    .unwrap()
}

/// Deterministic environment paying a constant reward forever.
#[derive(Debug, Clone)]
pub struct ConstantEnv {
    pub reward: f64,
    pub steps: usize,
}

impl Environment for ConstantEnv {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            name: "constant".into(),
            obs_dim: 1,
            act_dim: 1,
            max_episode_steps: 10,
            action_scale: vec![1.0],
        }
    }

    fn reset(&mut self, _seed: u64) -> Vec<f64> {
        self.steps = 0;
        vec![0.0]
    }

    fn observe(&self) -> Vec<f64> {
        vec![0.0]
    }

    fn step(&mut self, _action: &[f64]) -> StepOutcome {
        self.steps += 1;
        let truncated = self.steps >= 10;
        StepOutcome {
            obs: vec![0.0],
            reward: self.reward,
            done: truncated,
            truncated,
            info: StepInfo::default(),
        }
    }

    fn fixture(&self) -> serde_json::Value {
        json!({"reward": self.reward})
    }
}
