//! Ground-truth generators that do not share code paths with the learners:
//! central finite differences, Monte-Carlo soft returns, and the
//! soft-optimal values of the bandit chain by backward induction.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::actor::Actor;
use crate::env::{BanditChain, Environment, NUM_STATES};
use crate::error::{Error, Result};
use crate::numerics::{Mlp, MlpGrads};
use crate::rng;

/// Central differences `(f(p + h e) - f(p - h e)) / 2h` for every parameter.
pub fn finite_diff_grad(mut f: impl FnMut(&Mlp) -> f64, params: &Mlp, h: f64) -> MlpGrads {
    let mut grads = MlpGrads::zeros_like(params);
    let mut probe = params.clone();
    let mut flat = Vec::with_capacity(params.num_params());
    let mut index = 0;
    let total = params.num_params();
    while index < total {
        let mut k = 0;
        let mut original = 0.0;
        probe.for_each_param_mut(|p| {
            if k == index {
                original = *p;
                *p = original + h;
            }
            k += 1;
        });
        let plus = f(&probe);
        set_param(&mut probe, index, original - h);
        let minus = f(&probe);
        set_param(&mut probe, index, original);
        flat.push((plus - minus) / (2.0 * h));
        index += 1;
    }
    let mut it = flat.into_iter();
    for l in &mut grads.layers {
        l.weight.iter_mut().for_each(|g| *g = it.next().expect("count matches"));
        l.bias.iter_mut().for_each(|g| *g = it.next().expect("count matches"));
    }
    grads
}

fn set_param(net: &mut Mlp, index: usize, value: f64) {
    let mut k = 0;
    net.for_each_param_mut(|p| {
        if k == index {
            *p = value;
        }
        k += 1;
    });
}

/// Largest `|a - b| / max(|a|, |b|, floor)` over matching entries.
pub fn max_relative_error(a: &MlpGrads, b: &MlpGrads, floor: f64) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// A policy that can be rolled out by the Monte-Carlo oracle.
pub trait StochasticPolicy {
    /// Action and its log-density under the policy.
    fn sample_action(&self, obs: &[f64], rng: &mut rng::Rng) -> Result<(Vec<f64>, f64)>;
}

impl StochasticPolicy for Actor {
    fn sample_action(&self, obs: &[f64], rng: &mut rng::Rng) -> Result<(Vec<f64>, f64)> {
        self.sample(obs, rng)
    }
}

/// Smallest `T` with `gamma^T < 1e-3`.
pub fn truth_horizon(gamma: f64) -> usize {
    if gamma <= 0.0 {
        return 1;
    }
    let mut t = 1;
    let mut g = gamma;
    while g >= 1e-3 {
        g *= gamma;
        t += 1;
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    pub n_rollouts: usize,
    pub gamma: f64,
    pub alpha: f64,
    /// Multiplier applied to every reward, matching the learner's units.
    pub reward_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub horizon: usize,
}

/// Monte-Carlo soft return of taking `action` in the state held by `env`
/// and following `policy` afterwards.
///
/// Each rollout starts from a clone of `env` with a fresh reward-noise
/// stream. The entropy bonus is counted from the second step on; rollouts
/// stop at true terminals or after [`truth_horizon`] steps (time-limit
/// truncation is ignored, since the learner bootstraps through it).
pub fn mc_true_q<E: Environment + Clone, P: StochasticPolicy>(
    env: &E,
    policy: &P,
    action: &[f64],
    settings: McSettings,
    rng: &mut rng::Rng,
) -> Result<McEstimate> {
    if settings.n_rollouts == 0 {
        return Err(Error::contract("mc_true_q needs at least one rollout"));
    }
    let horizon = truth_horizon(settings.gamma);
    let mut returns = Vec::with_capacity(settings.n_rollouts);
    for _ in 0..settings.n_rollouts {
        let mut sim = env.clone();
        sim.reseed_noise(rng.gen());
        let first = sim.step(action);
        let mut g = settings.reward_scale * first.reward;
        let mut done = first.done && !first.truncated;
        let mut obs = first.obs;
        let mut discount = 1.0;
        for _ in 1..horizon {
            if done {
                break;
            }
            discount *= settings.gamma;
            let (a, logp) = policy.sample_action(&obs, rng)?;
            let out = sim.step(&a);
            g += discount * (settings.reward_scale * out.reward - settings.alpha * logp);
            done = out.done && !out.truncated;
            obs = out.obs;
        }
        returns.push(g);
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = if returns.len() > 1 {
        returns.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        std_err: (var / n).sqrt(),
        horizon,
    })
}

/// Estimated minus true Q over sampled state-action pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub mean_bias: f64,
    /// Standard error of `mean_bias` across samples.
    pub std_err: f64,
    /// `(estimate, truth)` per sample.
    pub samples: Vec<(f64, f64)>,
    pub n_rollouts: usize,
    pub horizon: usize,
}

impl BiasReport {
    pub fn from_samples(samples: Vec<(f64, f64)>, n_rollouts: usize, horizon: usize) -> Self {
        let n = samples.len().max(1) as f64;
        let diffs: Vec<f64> = samples.iter().map(|(e, t)| e - t).collect();
        let mean = diffs.iter().sum::<f64>() / n;
        let var = if diffs.len() > 1 {
            diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        BiasReport {
            mean_bias: mean,
            std_err: (var / n).sqrt(),
            samples,
            n_rollouts,
            horizon,
        }
    }
}

/// Soft-optimal values of the bandit chain on a uniform action grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftQTable {
    pub grid: Vec<f64>,
    /// `q[s][k]` is `Q*(s, grid[k])`.
    pub q: Vec<Vec<f64>>,
    /// Standard deviation of the soft return, same layout as `q`.
    pub std: Vec<Vec<f64>>,
    /// Soft state values `V*(s)`.
    pub v: Vec<f64>,
    pub alpha: f64,
    pub gamma: f64,
}

impl SoftQTable {
    fn interp(&self, values: &[f64], a: f64) -> f64 {
        let n = self.grid.len();
        let h = self.grid[1] - self.grid[0];
        let pos = ((a.clamp(-1.0, 1.0) + 1.0) / h).min((n - 1) as f64);
        let k = (pos.floor() as usize).min(n - 2);
        let w = pos - k as f64;
        values[k] * (1.0 - w) + values[k + 1] * w
    }

    pub fn q_at(&self, state: usize, a: f64) -> f64 {
        self.interp(&self.q[state], a)
    }

    pub fn std_at(&self, state: usize, a: f64) -> f64 {
        self.interp(&self.std[state], a)
    }

    /// Log-density of the soft-optimal policy at `a`.
    pub fn log_policy(&self, state: usize, a: f64) -> f64 {
        if self.alpha == 0.0 {
            return 0.0;
        }
        (self.q_at(state, a) - self.v[state]) / self.alpha
    }
}

/// Trapezoid weights on a uniform grid of step `h`.
fn trapezoid_weight(k: usize, n: usize, h: f64) -> f64 {
    if k == 0 || k + 1 == n {
        0.5 * h
    } else {
        h
    }
}

fn soft_q_on_grid(chain: &BanditChain, alpha: f64, gamma: f64, n: usize) -> SoftQTable {
    let h = 2.0 / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|k| -1.0 + k as f64 * h).collect();
    let nu2 = chain.noise_std * chain.noise_std;
    let mut q = vec![vec![0.0; n]; NUM_STATES];
    let mut var = vec![vec![0.0; n]; NUM_STATES];
    let mut v = vec![0.0; NUM_STATES];
    // Value and variance of the continuation after the last state.
    let (mut v_next, mut var_next) = (0.0, 0.0);
    for s in (0..NUM_STATES).rev() {
        for (k, &a) in grid.iter().enumerate() {
            q[s][k] = chain.mean_reward(s, a) + gamma * v_next;
            var[s][k] = nu2 + gamma * gamma * var_next;
        }
        if alpha > 0.0 {
            let m = q[s].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = (0..n)
                .map(|k| trapezoid_weight(k, n, h) * ((q[s][k] - m) / alpha).exp())
                .sum();
            v[s] = m + alpha * z.ln();
            // E_pi[Var] + Var_pi[Q - alpha log pi]; the second term vanishes
            // for the Boltzmann policy but is integrated all the same.
            let (mut e_var, mut e_soft, mut e_soft2) = (0.0, 0.0, 0.0);
            for k in 0..n {
                let logp = (q[s][k] - v[s]) / alpha;
                let p = trapezoid_weight(k, n, h) * logp.exp();
                let soft = q[s][k] - alpha * logp;
                e_var += p * var[s][k];
                e_soft += p * soft;
                e_soft2 += p * soft * soft;
            }
            var_next = e_var + (e_soft2 - e_soft * e_soft).max(0.0);
        } else {
            let (k_best, m) =
                q[s].iter().cloned().enumerate().fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (k, x)| if x > acc.1 { (k, x) } else { acc },
                );
            v[s] = m;
            var_next = var[s][k_best];
        }
        v_next = v[s];
    }
    SoftQTable {
        grid,
        q,
        std: var
            .into_iter()
            .map(|row| row.into_iter().map(f64::sqrt).collect())
            .collect(),
        v,
        alpha,
        gamma,
    }
}

/// Soft-optimal Q and return standard deviation of the bandit chain by
/// backward induction with trapezoid quadrature over actions.
///
/// Refuses if `grid_step > 1e-3` or if halving the step moves any value by
/// `1e-6` or more.
pub fn numeric_soft_q(chain: &BanditChain, alpha: f64, gamma: f64, grid_step: f64) -> Result<SoftQTable> {
    if !(grid_step > 0.0 && grid_step <= 1e-3) {
        return Err(Error::config(format!("grid step {grid_step} is coarser than 1e-3")));
    }
    if !(alpha >= 0.0 && (0.0..1.0).contains(&gamma)) {
        return Err(Error::config("need alpha >= 0 and 0 <= gamma < 1"));
    }
    let n = (2.0 / grid_step).ceil() as usize + 1;
    let coarse = soft_q_on_grid(chain, alpha, gamma, n);
    let fine = soft_q_on_grid(chain, alpha, gamma, 2 * n - 1);
    let mut worst: f64 = 0.0;
    for s in 0..NUM_STATES {
        worst = worst.max((coarse.v[s] - fine.v[s]).abs());
        for (k, &a) in coarse.grid.iter().enumerate() {
            worst = worst.max((coarse.q[s][k] - fine.q_at(s, a)).abs());
            worst = worst.max((coarse.std[s][k] - fine.std_at(s, a)).abs());
        }
    }
    if worst >= 1e-6 {
        return Err(Error::config(format!(
            "quadrature not converged: halving the grid moved values by {worst:.3e}"
        )));
    }
    Ok(coarse)
}

/// Samples from the soft-optimal policy of a [`SoftQTable`] by inverting
/// its tabulated CDF.
#[derive(Debug, Clone)]
pub struct BoltzmannPolicy {
    table: SoftQTable,
    cdf: Vec<Vec<f64>>,
}

impl BoltzmannPolicy {
    pub fn new(table: SoftQTable) -> Result<Self> {
        if table.alpha <= 0.0 {
            return Err(Error::config("Boltzmann policy needs alpha > 0"));
        }
        let n = table.grid.len();
        let h = table.grid[1] - table.grid[0];
        let cdf = (0..NUM_STATES)
            .map(|s| {
                let dens: Vec<f64> = (0..n).map(|k| table.log_policy(s, table.grid[k]).exp()).collect();
                let mut c = vec![0.0; n];
                for k in 1..n {
                    c[k] = c[k - 1] + 0.5 * h * (dens[k - 1] + dens[k]);
                }
                let total = c[n - 1];
                c.iter_mut().for_each(|x| *x /= total);
                c
            })
            .collect();
        Ok(BoltzmannPolicy { table, cdf })
    }

    pub fn table(&self) -> &SoftQTable {
        &self.table
    }
}

impl StochasticPolicy for BoltzmannPolicy {
    fn sample_action(&self, obs: &[f64], rng: &mut rng::Rng) -> Result<(Vec<f64>, f64)> {
        let s =
            BanditChain::state_of(obs).ok_or_else(|| Error::contract("no action is taken in the terminal state"))?;
        let u: f64 = rng.gen();
        let c = &self.cdf[s];
        let k = c.partition_point(|&x| x < u).clamp(1, c.len() - 1);
        let w = (u - c[k - 1]) / (c[k] - c[k - 1]).max(f64::MIN_POSITIVE);
        let g = &self.table.grid;
        let a = g[k - 1] + w.clamp(0.0, 1.0) * (g[k] - g[k - 1]);
        Ok((vec![a], self.table.log_policy(s, a)))
    }
}
