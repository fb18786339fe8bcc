//! Critic learning for Gaussian value distributions.
//!
//! Each critic network maps `[obs | action]` to two raw outputs which the
//! value head turns into a mean `Q` and a standard deviation `sigma`. The
//! parameter gradient is assembled from two per-sample coefficients: one
//! multiplying `grad Q` (mean-related) and one multiplying `grad sigma`
//! (variance-related). With expected-value substitution the mean-related
//! coefficient uses the expected target `y_q`; the variance-related one
//! always uses the random target `y_z`, clipped to `Q +- b`.
//!
//! With the adaptive rule, `b = xi * E[sigma]` and the whole gradient is
//! scaled by `omega + eps_omega` where `omega = E[sigma^2]`; both statistics
//! are moving averages with rate `tau`, kept per critic.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::actor::Actor;
use crate::distributions::{
    policy_logprob, policy_sample, sample_value, value_head, value_head_spread_grad, ValueDistParams,
};
use crate::error::{Error, Result};
use crate::numerics::{hconcat, AdamState, Mlp, MlpGrads};
use crate::replay::Batch;

/// Twin-minimum selection over target means. Returns 1 or 2; ties go to 1.
pub fn select_min_target(q1_next: f64, q2_next: f64) -> usize {
    if q1_next <= q2_next {
        1
    } else {
        2
    }
}

/// Expected and random bootstrap targets for one transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetPair {
    pub y_q: f64,
    pub y_z: f64,
    /// 1-based index of the target critic that produced the targets.
    pub chosen_index: usize,
}

/// `y_q = r + m*gamma*(q_next - alpha*logp_next)` and the same with the
/// sampled return `z_draw` in place of `q_next`; `m = 0` on true terminals.
pub fn compute_targets(
    r: f64,
    terminal: bool,
    q_next: f64,
    z_draw: f64,
    logp_next: f64,
    alpha: f64,
    gamma: f64,
) -> (f64, f64) {
    let mask = if terminal { 0.0 } else { 1.0 };
    let y_q = r + mask * gamma * (q_next - alpha * logp_next);
    let y_z = r + mask * gamma * (z_draw - alpha * logp_next);
    (y_q, y_z)
}

/// Clamp `y_z` into `[q_current - b, q_current + b]`. NaN bounds give NaN,
/// which the non-finite gradient check then reports.
pub fn clip_target(y_z: f64, q_current: f64, b: f64) -> f64 {
    let (lo, hi) = (q_current - b, q_current + b);
    if lo <= hi {
        y_z.clamp(lo, hi)
    } else {
        f64::NAN
    }
}

/// Coefficients multiplying `grad Q` and `grad sigma` for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCoeffs {
    pub g_q: f64,
    pub g_sigma: f64,
}

/// Gaussian negative log-likelihood coefficients with `eps`-guarded poles.
///
/// `mean_target` is whatever feeds the mean-related term (`y_q` or `y_z`).
pub fn nll_coeffs(mean_target: f64, y_z_clipped: f64, q: f64, sigma: f64, eps: f64) -> GradCoeffs {
    let s2 = sigma * sigma;
    let dev = y_z_clipped - q;
    GradCoeffs {
        g_q: -(mean_target - q) / (s2 + eps),
        g_sigma: -(dev * dev - s2) / (s2 * sigma + eps),
    }
}

/// The refined kernel: expected target in the mean term.
pub fn grad_coeffs_dsact(y_q: f64, y_z_clipped: f64, q: f64, sigma: f64, eps: f64) -> GradCoeffs {
    nll_coeffs(y_q, y_z_clipped, q, sigma, eps)
}

/// Moving-average refresh of the clipping boundary and gradient scale.
///
/// `b' = tau*xi*mean(sigma) + (1-tau)*b`, `omega' = tau*mean(sigma^2) + (1-tau)*omega`.
pub fn update_boundary_scale(b: f64, omega: f64, sigma_batch: &[f64], tau: f64, xi: f64) -> Result<(f64, f64)> {
    if sigma_batch.is_empty() {
        return Err(Error::contract("boundary update needs a non-empty sigma batch"));
    }
    let n = sigma_batch.len() as f64;
    let mean = sigma_batch.iter().sum::<f64>() / n;
    let mean_sq = sigma_batch.iter().map(|s| s * s).sum::<f64>() / n;
    Ok((tau * xi * mean + (1.0 - tau) * b, tau * mean_sq + (1.0 - tau) * omega))
}

/// `target <- tau*source + (1-tau)*target`.
pub fn soft_update(source: &Mlp, target: &mut Mlp, tau: f64) -> Result<()> {
    target.soft_update_from(source, tau)
}

/// How the clipping boundary and gradient scale are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// `b = xi*E[sigma]`, gradient scaled by `omega + eps_omega`, `eps` in
    /// the denominators.
    Adaptive { xi: f64, eps: f64, eps_omega: f64 },
    /// Constant `b`, unit scale, unguarded denominators.
    Fixed { b: f64 },
}

/// Per-sample loss family for a critic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticLoss {
    Distributional {
        expected_value_substitution: bool,
        boundary: Boundary,
    },
    /// Squared TD error on the mean head only.
    Mse,
}

/// Everything that distinguishes one critic-update procedure from another.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateRule {
    pub twin: bool,
    pub loss: CriticLoss,
}

impl UpdateRule {
    /// All refinements on.
    pub fn dsact(xi: f64, eps: f64, eps_omega: f64) -> Self {
        UpdateRule {
            twin: true,
            loss: CriticLoss::Distributional {
                expected_value_substitution: true,
                boundary: Boundary::Adaptive { xi, eps, eps_omega },
            },
        }
    }

    pub fn num_critics(&self) -> usize {
        if self.twin {
            2
        } else {
            1
        }
    }
}

/// Scalars shared by every critic update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticHyper {
    pub gamma: f64,
    pub tau: f64,
    pub lr: f64,
}

/// A value-distribution network, its target copy, optimizer state and
/// adaptive statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticSlot {
    pub net: Mlp,
    pub target: Mlp,
    pub adam: AdamState,
    pub b: f64,
    pub omega: f64,
}

impl CriticSlot {
    pub fn new(net: Mlp) -> Self {
        CriticSlot {
            target: net.clone(),
            adam: AdamState::new(&net),
            net,
            b: 0.0,
            omega: 0.0,
        }
    }
}

/// One or two critics plus the cold-start flag of their statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticPairState {
    pub critics: Vec<CriticSlot>,
    pub stats_initialized: bool,
}

impl CriticPairState {
    pub fn new(critics: Vec<Mlp>) -> Self {
        CriticPairState {
            critics: critics.into_iter().map(CriticSlot::new).collect(),
            stats_initialized: false,
        }
    }

    pub fn nets(&self) -> Vec<&Mlp> {
        self.critics.iter().map(|c| &c.net).collect()
    }
}

/// Evaluate a critic network on a batch of `(obs, act)` pairs.
pub fn evaluate(net: &Mlp, obs: ArrayView2<f64>, act: ArrayView2<f64>) -> Result<Vec<ValueDistParams>> {
    let out = net.predict(hconcat(obs, act).view())?;
    Ok(out.rows().into_iter().map(|r| value_head(r[0], r[1])).collect())
}

/// Batch statistics gathered while forming a critic gradient.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CriticBatchStats {
    pub q_mean: f64,
    pub sigma_mean: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub td_abs_mean: f64,
}

/// Batch-mean parameter gradient of one critic (descent direction).
///
/// Also returns the per-sample `sigma` values of the forward pass, which
/// feed the boundary/scale statistics.
pub fn critic_gradient(
    net: &Mlp,
    obs: ArrayView2<f64>,
    act: ArrayView2<f64>,
    targets: &[TargetPair],
    b: f64,
    omega: f64,
    loss: CriticLoss,
) -> Result<(MlpGrads, Vec<f64>, CriticBatchStats)> {
    let n = targets.len();
    if n == 0 || obs.nrows() != n || act.nrows() != n {
        return Err(Error::contract("critic gradient needs matching, non-empty batches"));
    }
    let (out, cache) = net.forward(hconcat(obs, act).view())?;
    let mut og = Array2::zeros((n, 2));
    let mut sigmas = Vec::with_capacity(n);
    let mut stats = CriticBatchStats {
        sigma_min: f64::INFINITY,
        sigma_max: 0.0,
        ..Default::default()
    };
    let inv_n = 1.0 / n as f64;
    for (i, t) in targets.iter().enumerate() {
        let raw_spread = out[[i, 1]];
        let ValueDistParams { q, sigma } = value_head(out[[i, 0]], raw_spread);
        sigmas.push(sigma);
        stats.q_mean += q * inv_n;
        stats.sigma_mean += sigma * inv_n;
        stats.sigma_min = stats.sigma_min.min(sigma);
        stats.sigma_max = stats.sigma_max.max(sigma);
        stats.td_abs_mean += (t.y_q - q).abs() * inv_n;
        let (g_q, g_sigma, scale) = match loss {
            CriticLoss::Mse => (-(t.y_q - q), 0.0, 1.0),
            CriticLoss::Distributional {
                expected_value_substitution,
                boundary,
            } => {
                let mean_target = if expected_value_substitution { t.y_q } else { t.y_z };
                let (b, eps, scale) = match boundary {
                    Boundary::Adaptive { eps, eps_omega, .. } => (b, eps, omega + eps_omega),
                    Boundary::Fixed { b } => (b, 0.0, 1.0),
                };
                let clipped = clip_target(t.y_z, q, b);
                let c = nll_coeffs(mean_target, clipped, q, sigma, eps);
                (c.g_q, c.g_sigma, scale)
            }
        };
        og[[i, 0]] = scale * g_q * inv_n;
        og[[i, 1]] = scale * g_sigma * value_head_spread_grad(raw_spread) * inv_n;
    }
    let (grads, _) = net.backward(&cache, og.view())?;
    Ok((grads, sigmas, stats))
}

/// Build per-sample targets from the target networks.
///
/// One `a' ~ pi_target(s')` and one standard-normal return draw per sample,
/// shared by every critic being updated.
pub fn compute_batch_targets<R: Rng + ?Sized>(
    state: &CriticPairState,
    actor_target: &Actor,
    batch: &Batch,
    alpha: f64,
    gamma: f64,
    twin: bool,
    rng: &mut R,
) -> Result<Vec<TargetPair>> {
    let n = batch.len();
    let act_dim = actor_target.act_dim();
    let action_noise = Array2::from_shape_simple_fn((n, act_dim), || rng.sample(StandardNormal));
    let z_noise: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();

    let dists = actor_target.dists(batch.next_obs.view())?;
    let mut next_act = Array2::zeros((n, act_dim));
    let mut logp_next = Vec::with_capacity(n);
    for (i, d) in dists.iter().enumerate() {
        let noise = action_noise.row(i).to_vec();
        let (u, a) = policy_sample(d, &noise);
        logp_next.push(policy_logprob(d, &u));
        for (j, v) in a.into_iter().enumerate() {
            next_act[[i, j]] = v;
        }
    }
    let n_critics = if twin { 2 } else { 1 };
    if state.critics.len() < n_critics {
        return Err(Error::config("twin targets requested from a single critic"));
    }
    let next_vals: Vec<Vec<ValueDistParams>> = state.critics[..n_critics]
        .iter()
        .map(|c| evaluate(&c.target, batch.next_obs.view(), next_act.view()))
        .collect::<Result<_>>()?;

    let targets = (0..n)
        .map(|i| {
            let chosen_index = if twin {
                select_min_target(next_vals[0][i].q, next_vals[1][i].q)
            } else {
                1
            };
            let dist = next_vals[chosen_index - 1][i];
            let z = sample_value(dist, z_noise[i]);
            let (y_q, y_z) = compute_targets(
                batch.reward[i],
                batch.terminal[i],
                dist.q,
                z,
                logp_next[i],
                alpha,
                gamma,
            );
            TargetPair { y_q, y_z, chosen_index }
        })
        .collect();
    Ok(targets)
}

/// Diagnostics of one critic update, per critic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CriticUpdateReport {
    pub stats: Vec<CriticBatchStats>,
}

/// One critic update under an arbitrary [`UpdateRule`].
///
/// Every critic takes one Adam step on its own batch-mean gradient, then
/// refreshes its boundary and scale from the pre-step `sigma` values.
pub fn update_with_rule<R: Rng + ?Sized>(
    state: &mut CriticPairState,
    batch: &Batch,
    actor_target: &Actor,
    alpha: f64,
    rule: UpdateRule,
    hyper: CriticHyper,
    rng: &mut R,
) -> Result<CriticUpdateReport> {
    if batch.is_empty() {
        return Err(Error::contract("critic update needs a non-empty batch"));
    }
    if state.critics.len() != rule.num_critics() {
        return Err(Error::config(format!(
            "rule expects {} critics, state has {}",
            rule.num_critics(),
            state.critics.len()
        )));
    }
    let targets = compute_batch_targets(state, actor_target, batch, alpha, hyper.gamma, rule.twin, rng)?;
    let (xi, adaptive) = match rule.loss {
        CriticLoss::Distributional {
            boundary: Boundary::Adaptive { xi, .. },
            ..
        } => (xi, true),
        CriticLoss::Distributional {
            boundary: Boundary::Fixed { b },
            ..
        } => {
            for c in &mut state.critics {
                c.b = b;
            }
            (1.0, false)
        }
        CriticLoss::Mse => (1.0, false),
    };

    let first = !state.stats_initialized;
    let mut report = CriticUpdateReport::default();
    for (idx, slot) in state.critics.iter_mut().enumerate() {
        if first && adaptive {
            // Cold start: seed b and omega from this batch before using them.
            let sig: Vec<f64> = evaluate(&slot.net, batch.obs.view(), batch.act.view())?
                .iter()
                .map(|d| d.sigma)
                .collect();
            let (b, omega) = update_boundary_scale(slot.b, slot.omega, &sig, 1.0, xi)?;
            slot.b = b;
            slot.omega = omega;
        }
        let (grads, sigmas, stats) = critic_gradient(
            &slot.net,
            batch.obs.view(),
            batch.act.view(),
            &targets,
            slot.b,
            slot.omega,
            rule.loss,
        )?;
        if !grads.is_finite() {
            return Err(Error::numerical(
                format!("critic {} update", idx + 1),
                format!(
                    "non-finite gradient; q_mean={:.6e} sigma in [{:.3e}, {:.3e}] |td|={:.3e} b={:.3e} omega={:.3e}",
                    stats.q_mean, stats.sigma_min, stats.sigma_max, stats.td_abs_mean, slot.b, slot.omega
                ),
            ));
        }
        slot.adam.step(&mut slot.net, &grads, hyper.lr)?;
        let tau = if first { 1.0 } else { hyper.tau };
        let (b, omega) = update_boundary_scale(slot.b, slot.omega, &sigmas, tau, xi)?;
        if adaptive {
            slot.b = b;
        }
        slot.omega = omega;
        report.stats.push(stats);
    }
    state.stats_initialized = true;
    Ok(report)
}

/// The full refined critic update: twin distributions, expected-value
/// substitution, adaptive boundary and scale.
#[allow(clippy::too_many_arguments)]
pub fn critic_update<R: Rng + ?Sized>(
    state: &mut CriticPairState,
    batch: &Batch,
    actor_target: &Actor,
    alpha: f64,
    hyper: CriticHyper,
    xi: f64,
    eps: f64,
    eps_omega: f64,
    rng: &mut R,
) -> Result<CriticUpdateReport> {
    update_with_rule(
        state,
        batch,
        actor_target,
        alpha,
        UpdateRule::dsact(xi, eps, eps_omega),
        hyper,
        rng,
    )
}

/// Soft-update every critic's target network.
pub fn sync_targets(state: &mut CriticPairState, tau: f64) -> Result<()> {
    for c in &mut state.critics {
        c.target.soft_update_from(&c.net, tau)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_selection() {
        assert_eq!(select_min_target(3.0, 5.0), 1);
        assert_eq!(select_min_target(5.0, 3.0), 2);
        assert_eq!(select_min_target(4.0, 4.0), 1);
    }

    #[test]
    fn target_examples() {
        let (yq, yz) = compute_targets(1.5, false, 10.0, 12.0, -1.0, 0.2, 0.0);
        assert_eq!((yq, yz), (1.5, 1.5));
        let (yq, yz) = compute_targets(1.0, true, 10.0, -7.0, 3.0, 0.2, 0.99);
        assert_eq!((yq, yz), (1.0, 1.0));
        let (yq, yz) = compute_targets(0.0, false, 10.0, 12.0, -1.0, 0.2, 0.99);
        assert!((yq - 10.098).abs() < 1e-12);
        assert!((yz - 12.078).abs() < 1e-12);
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clip_target(10.0, 0.0, 3.0), 3.0);
        assert_eq!(clip_target(-10.0, 0.0, 3.0), -3.0);
        assert_eq!(clip_target(2.0, 0.0, 3.0), 2.0);
    }

    #[test]
    fn coeff_examples() {
        let c = grad_coeffs_dsact(1.0, 0.0, 1.0, 0.5, 0.1);
        assert_eq!(c.g_q, 0.0);
        let c = grad_coeffs_dsact(4.0, 1.5, 1.0, 0.5, 0.1);
        assert_eq!(c.g_sigma, 0.0);
        let c = grad_coeffs_dsact(2.0, 2.0, 1.0, 1.0, 0.0);
        assert_eq!((c.g_q, c.g_sigma), (-1.0, 0.0));
    }

    #[test]
    fn boundary_scale_examples() {
        let (b, w) = update_boundary_scale(0.0, 0.0, &[2.0, 2.0, 2.0], 1.0, 3.0).unwrap();
        assert_eq!((b, w), (6.0, 4.0));
        let (b, w) = update_boundary_scale(1.25, 0.5, &[2.0, 7.0], 0.0, 3.0).unwrap();
        assert_eq!((b, w), (1.25, 0.5));
        assert!(update_boundary_scale(1.0, 1.0, &[], 0.5, 3.0).is_err());
    }

    #[test]
    fn boundary_scale_converges_geometrically() {
        let sig = [0.5, 1.5];
        let (target_b, target_w) = (3.0 * 1.0, (0.25 + 2.25) / 2.0);
        let (mut b, mut w) = (0.0, 0.0);
        let tau = 0.1;
        for n in 1..=50 {
            let r = update_boundary_scale(b, w, &sig, tau, 3.0).unwrap();
            b = r.0;
            w = r.1;
            let expect = (1.0f64 - tau).powi(n);
            assert!(((target_b - b) / target_b - expect).abs() < 1e-12);
            assert!(((target_w - w) / target_w - expect).abs() < 1e-12);
        }
    }
}
