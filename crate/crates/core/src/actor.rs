//! Policy improvement over the twin-minimum mean and temperature adaptation.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::distributions::{policy_logprob, policy_sample, squash_correction_grad, PolicyDistParams};
use crate::error::{Error, Result};
use crate::numerics::{hconcat, Mlp, MlpGrads};

/// Squashed diagonal-Gaussian policy network: `obs -> [mu | log_std]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    pub net: Mlp,
}

impl Actor {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, act_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2 * act_dim);
        Ok(Actor {
            net: Mlp::new(&sizes, rng)?,
        })
    }

    pub fn from_net(net: Mlp) -> Result<Self> {
        if !net.out_dim().is_multiple_of(2) {
            return Err(Error::config("actor output width must be even"));
        }
        Ok(Actor { net })
    }

    pub fn obs_dim(&self) -> usize {
        self.net.in_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.net.out_dim() / 2
    }

    pub fn dist(&self, obs: &[f64]) -> Result<PolicyDistParams> {
        let (raw, _) = self.net.forward_one(obs)?;
        Ok(PolicyDistParams::from_raw(&raw).0)
    }

    pub fn dists(&self, obs: ArrayView2<f64>) -> Result<Vec<PolicyDistParams>> {
        let raw = self.net.predict(obs)?;
        Ok(raw
            .rows()
            .into_iter()
            .map(|r| PolicyDistParams::from_raw(&r.to_vec()).0)
            .collect())
    }

    /// Stochastic action and its log-probability.
    pub fn sample<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64)> {
        let d = self.dist(obs)?;
        let noise: Vec<f64> = (0..d.dim()).map(|_| rng.sample(StandardNormal)).collect();
        let (u, a) = policy_sample(&d, &noise);
        Ok((a, policy_logprob(&d, &u)))
    }

    /// Deterministic action `tanh(mu)`.
    pub fn mode(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.dist(obs)?.mode())
    }

    /// Fresh-action log-probabilities for a batch of states.
    pub fn sample_logprobs<R: Rng + ?Sized>(&self, obs: ArrayView2<f64>, rng: &mut R) -> Result<Vec<f64>> {
        let dists = self.dists(obs)?;
        Ok(dists
            .iter()
            .map(|d| {
                let noise: Vec<f64> = (0..d.dim()).map(|_| rng.sample(StandardNormal)).collect();
                let (u, _) = policy_sample(d, &noise);
                policy_logprob(d, &u)
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ActorStats {
    /// Batch mean of the objective `min_i Q_i - alpha * log pi`.
    pub objective: f64,
    pub q_min_mean: f64,
    pub logp_mean: f64,
}

/// Ascent gradient of the batch-mean objective
/// `min_i Q_i(s, a_phi(s, zeta)) - alpha * log pi_phi(a_phi | s)`.
///
/// `noise` holds one standard-normal row per state. The critics are
/// treated as constants; the gradient reaches the policy through the
/// action fed to the selected critic and through the log-probability.
pub fn actor_gradient_with_noise(
    actor: &Actor,
    states: ArrayView2<f64>,
    critics: &[&Mlp],
    alpha: f64,
    noise: ArrayView2<f64>,
) -> Result<(MlpGrads, ActorStats)> {
    let n = states.nrows();
    let d = actor.act_dim();
    let obs_dim = states.ncols();
    if n == 0 || noise.dim() != (n, d) || critics.is_empty() {
        return Err(Error::contract(
            "actor gradient: empty batch, bad noise shape or no critic",
        ));
    }
    let (raw, cache) = actor.net.forward(states)?;
    let mut dists = Vec::with_capacity(n);
    let mut actions = Array2::zeros((n, d));
    let mut pre_squash = Array2::zeros((n, d));
    let mut logps = Vec::with_capacity(n);
    for i in 0..n {
        let (dist, active) = PolicyDistParams::from_raw(&raw.row(i).to_vec());
        let z = noise.row(i).to_vec();
        let (u, a) = policy_sample(&dist, &z);
        logps.push(policy_logprob(&dist, &u));
        for j in 0..d {
            actions[[i, j]] = a[j];
            pre_squash[[i, j]] = u[j];
        }
        dists.push((dist, active));
    }

    let input = hconcat(states, actions.view());
    let mut outs = Vec::with_capacity(critics.len());
    for c in critics {
        outs.push(c.forward(input.view())?);
    }
    // Index of the critic with the smallest mean per sample; ties to the first.
    let chosen: Vec<usize> = (0..n)
        .map(|i| {
            let mut best = 0;
            for (k, (o, _)) in outs.iter().enumerate().skip(1) {
                if o[[i, 0]] < outs[best].0[[i, 0]] {
                    best = k;
                }
            }
            best
        })
        .collect();

    let inv_n = 1.0 / n as f64;
    let mut dq_da = Array2::zeros((n, d));
    for (k, (c, (_, cache_c))) in critics.iter().zip(&outs).enumerate() {
        if !chosen.contains(&k) {
            continue;
        }
        let mut og = Array2::zeros((n, 2));
        for i in 0..n {
            if chosen[i] == k {
                og[[i, 0]] = 1.0;
            }
        }
        let gin = c.input_gradient(cache_c, og.view())?;
        for i in 0..n {
            if chosen[i] == k {
                for j in 0..d {
                    dq_da[[i, j]] = gin[[i, obs_dim + j]];
                }
            }
        }
    }

    let mut stats = ActorStats::default();
    let mut og = Array2::zeros((n, 2 * d));
    for i in 0..n {
        let (dist, active) = &dists[i];
        let q = outs[chosen[i]].0[[i, 0]];
        stats.q_min_mean += q * inv_n;
        stats.logp_mean += logps[i] * inv_n;
        stats.objective += (q - alpha * logps[i]) * inv_n;
        for j in 0..d {
            let u = pre_squash[[i, j]];
            let t = u.tanh();
            let std = dist.log_std[j].exp();
            // d(objective)/du with mu and log_std held fixed in the Gaussian
            // part; the Gaussian term cancels along the reparameterization.
            let g_u = dq_da[[i, j]] * (1.0 - t * t) - alpha * squash_correction_grad(u);
            og[[i, j]] = g_u * inv_n;
            if active[j] {
                og[[i, d + j]] = (g_u * std * noise[[i, j]] + alpha) * inv_n;
            }
        }
    }
    let (grads, _) = actor.net.backward(&cache, og.view())?;
    if !grads.is_finite() {
        return Err(Error::numerical(
            "actor gradient",
            format!(
                "non-finite gradient; q_min_mean={:.6e} logp_mean={:.6e} alpha={alpha:.3e}",
                stats.q_min_mean, stats.logp_mean
            ),
        ));
    }
    Ok((grads, stats))
}

/// [`actor_gradient_with_noise`] with one fresh noise row per state.
pub fn actor_gradient<R: Rng + ?Sized>(
    actor: &Actor,
    states: ArrayView2<f64>,
    critics: &[&Mlp],
    alpha: f64,
    rng: &mut R,
) -> Result<(MlpGrads, ActorStats)> {
    let noise = Array2::from_shape_simple_fn((states.nrows(), actor.act_dim()), || rng.sample(StandardNormal));
    actor_gradient_with_noise(actor, states, critics, alpha, noise.view())
}

/// Entropy temperature with a positivity floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Temperature {
    pub alpha: f64,
    pub target_entropy: f64,
    pub lr_alpha: f64,
}

pub const ALPHA_MIN: f64 = 1e-6;

impl Temperature {
    /// `alpha <- max(ALPHA_MIN, alpha - lr * mean(-logp - target_entropy))`.
    pub fn update(&mut self, logp_batch: &[f64]) {
        if logp_batch.is_empty() {
            return;
        }
        let entropy = -logp_batch.iter().sum::<f64>() / logp_batch.len() as f64;
        self.alpha = (self.alpha - self.lr_alpha * (entropy - self.target_entropy)).max(ALPHA_MIN);
    }
}
