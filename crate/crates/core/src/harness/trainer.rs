use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::actor::{actor_gradient, Actor, Temperature};
use crate::critic::{sync_targets, CriticHyper, CriticPairState, CriticUpdateReport};
use crate::env::{Env, EnvConfig, EnvSpec, Environment};
use crate::error::{Error, Result};
use crate::numerics::{AdamState, Mlp};
use crate::oracles::{mc_true_q, truth_horizon, BiasReport, McSettings};
use crate::replay::{ReplayBuffer, Transition};
use crate::rng::{self, Rng};
use crate::variants::{build_variant, CriticProcedure};

use super::checkpoint::{Agent, Checkpoint, FORMAT_VERSION};
use super::config::RunConfig;

/// Evaluation episodes are seeded `EVAL_SEED_BASE + k`, independent of the
/// run seed, so every run is scored on the same initial states.
pub const EVAL_SEED_BASE: u64 = 1_000_000;

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iteration: usize,
    pub env_steps: usize,
    /// Mean undiscounted return of the deterministic policy.
    pub avg_return: f64,
    pub return_std: f64,
    pub q_mean: Option<f64>,
    pub sigma_mean: Option<f64>,
    pub alpha: f64,
    pub b1: f64,
    pub b2: Option<f64>,
    pub omega1: f64,
    pub omega2: Option<f64>,
    pub entropy_estimate: Option<f64>,
    pub bias_estimate: Option<f64>,
}

/// Undiscounted evaluation returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub mean: f64,
    /// Population standard deviation (0 for one episode).
    pub std: f64,
    pub returns: Vec<f64>,
    /// Episodes with at least one collision step.
    pub collision_episodes: usize,
    /// Mean `|lateral error|` over all steps.
    pub mean_tracking_error: f64,
}

/// Roll out `episodes` episodes, resetting with `seed_base + k`, calling
/// `start` after each reset and `act` for every action.
pub fn run_episodes(
    env: &mut Env,
    episodes: usize,
    seed_base: u64,
    mut start: impl FnMut(&mut Env),
    mut act: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<EvalResult> {
    if episodes == 0 {
        return Err(Error::config("need at least one evaluation episode"));
    }
    let mut returns = Vec::with_capacity(episodes);
    let mut collision_episodes = 0;
    let (mut err_sum, mut err_n) = (0.0, 0usize);
    for k in 0..episodes {
        env.reset(seed_base + k as u64);
        start(env);
        let mut obs = env.observe();
        let mut ret = 0.0;
        let mut collided = false;
        loop {
            let a = act(&obs)?;
            let out = env.step(&a);
            ret += out.reward;
            collided |= out.info.collision;
            err_sum += out.info.tracking_error;
            err_n += 1;
            obs = out.obs;
            if out.done {
                break;
            }
        }
        collision_episodes += collided as usize;
        returns.push(ret);
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let std = (returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(EvalResult {
        mean,
        std,
        returns,
        collision_episodes,
        mean_tracking_error: err_sum / err_n.max(1) as f64,
    })
}

/// Evaluate an agent: `tanh(mu)` actions when `deterministic`, policy
/// samples otherwise. Returns are raw environment rewards.
pub fn evaluate(
    agent: &Agent,
    env_cfg: &EnvConfig,
    episodes: usize,
    deterministic: bool,
    seed: u64,
) -> Result<EvalResult> {
    let mut env = env_cfg.build()?;
    let spec = env.spec();
    if agent.actor.obs_dim() != spec.obs_dim || agent.actor.act_dim() != spec.act_dim {
        return Err(Error::config(format!(
            "policy expects obs/act dims {}/{}, environment {} has {}/{}",
            agent.actor.obs_dim(),
            agent.actor.act_dim(),
            spec.name,
            spec.obs_dim,
            spec.act_dim
        )));
    }
    let mut r = rng::stream(seed, "eval-policy");
    run_episodes(
        &mut env,
        episodes,
        EVAL_SEED_BASE,
        |_| {},
        |obs| {
            if deterministic {
                agent.actor.mode(obs)
            } else {
                Ok(agent.actor.sample(obs, &mut r)?.0)
            }
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasSettings {
    pub n_samples: usize,
    pub n_rollouts: usize,
    pub gamma: f64,
    pub reward_scale: f64,
}

/// Estimated minus Monte-Carlo true soft Q at `(s, a)` pairs drawn from
/// fresh on-policy rollouts. Both sides are reported in unscaled reward
/// units; negative means underestimation.
pub fn measure_bias(agent: &Agent, env_cfg: &EnvConfig, settings: BiasSettings, r: &mut Rng) -> Result<BiasReport> {
    if settings.n_samples == 0 {
        return Err(Error::config("bias measurement needs at least one sample"));
    }
    let mut env = env_cfg.build()?;
    let max_steps = env.spec().max_episode_steps;
    let mc = McSettings {
        n_rollouts: settings.n_rollouts,
        gamma: settings.gamma,
        alpha: agent.alpha,
        reward_scale: settings.reward_scale,
    };
    let mut samples = Vec::with_capacity(settings.n_samples);
    while samples.len() < settings.n_samples {
        let mut obs = env.reset(r.gen());
        let t = r.gen_range(0..max_steps);
        let mut ended = false;
        for _ in 0..t {
            let (a, _) = agent.actor.sample(&obs, r)?;
            let out = env.step(&a);
            obs = out.obs;
            if out.done {
                ended = true;
                break;
            }
        }
        if ended {
            continue;
        }
        let (a, _) = agent.actor.sample(&obs, r)?;
        let estimate = agent.q_estimate(&obs, &a)?;
        let truth = mc_true_q(&env, &agent.actor, &a, mc, r)?;
        samples.push((estimate / settings.reward_scale, truth.mean / settings.reward_scale));
    }
    Ok(BiasReport::from_samples(
        samples,
        settings.n_rollouts,
        truth_horizon(settings.gamma),
    ))
}

/// Independent random streams of one run.
#[derive(Debug, Clone)]
struct Streams {
    env: Rng,
    act: Rng,
    replay: Rng,
    target: Rng,
    actor: Rng,
    alpha: Rng,
    bias: Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        Streams {
            env: rng::stream(seed, "env-reset"),
            act: rng::stream(seed, "act"),
            replay: rng::stream(seed, "replay"),
            target: rng::stream(seed, "target-draws"),
            actor: rng::stream(seed, "actor-noise"),
            alpha: rng::stream(seed, "alpha-noise"),
            bias: rng::stream(seed, "bias"),
        }
    }
}

/// The sample/update loop. Construct with [`Trainer::new`], then call
/// [`Trainer::iterate`] or [`Trainer::run`].
#[derive(Debug, Clone)]
pub struct Trainer {
    pub cfg: RunConfig,
    pub spec: EnvSpec,
    env: Env,
    obs: Vec<f64>,
    pub actor: Actor,
    pub actor_target: Actor,
    actor_adam: AdamState,
    pub critics: CriticPairState,
    procedure: CriticProcedure,
    pub temperature: Temperature,
    pub buffer: ReplayBuffer,
    streams: Streams,
    pub iteration: usize,
    pub env_steps: usize,
    pub critic_updates: usize,
    pub actor_updates: usize,
    last_critic: Option<CriticUpdateReport>,
    last_entropy: Option<f64>,
    metrics: Vec<MetricsRow>,
    last_bias: Option<BiasReport>,
}

impl Trainer {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let mut env = cfg.env.build()?;
        let spec = env.spec();
        let procedure = build_variant(cfg.variant(), cfg.xi, cfg.eps, cfg.eps_omega)?;
        let mut init = rng::stream(cfg.seed, "init");
        let actor = Actor::new(spec.obs_dim, spec.act_dim, &cfg.hidden_sizes, &mut init)?;
        let mut sizes = vec![spec.obs_dim + spec.act_dim];
        sizes.extend_from_slice(&cfg.hidden_sizes);
        sizes.push(2);
        let critics = (0..procedure.rule.num_critics())
            .map(|_| Mlp::new(&sizes, &mut init))
            .collect::<Result<Vec<_>>>()?;
        let mut streams = Streams::new(cfg.seed);
        let obs = env.reset(streams.env.gen());
        Ok(Trainer {
            temperature: Temperature {
                alpha: cfg.alpha_init,
                target_entropy: cfg.target_entropy.unwrap_or(-(spec.act_dim as f64)),
                lr_alpha: cfg.lr_alpha,
            },
            buffer: ReplayBuffer::new(cfg.buffer_capacity, spec.obs_dim, spec.act_dim)?,
            actor_adam: AdamState::new(&actor.net),
            actor_target: actor.clone(),
            actor,
            critics: CriticPairState::new(critics),
            procedure,
            env,
            obs,
            spec,
            streams,
            iteration: 0,
            env_steps: 0,
            critic_updates: 0,
            actor_updates: 0,
            last_critic: None,
            last_entropy: None,
            metrics: Vec::new(),
            last_bias: None,
            cfg,
        })
    }

    pub fn metrics(&self) -> &[MetricsRow] {
        &self.metrics
    }

    pub fn last_bias(&self) -> Option<&BiasReport> {
        self.last_bias.as_ref()
    }

    pub fn procedure(&self) -> CriticProcedure {
        self.procedure
    }

    pub fn agent(&self) -> Agent {
        Agent {
            actor: self.actor.clone(),
            critics: self.critics.critics.iter().map(|c| c.net.clone()).collect(),
            alpha: self.temperature.alpha,
        }
    }

    /// One iteration: collect `samples_per_iteration` steps with the
    /// current stochastic policy, then run the update phase once the
    /// buffer holds `warm_size` transitions.
    pub fn iterate(&mut self) -> Result<()> {
        for _ in 0..self.cfg.samples_per_iteration {
            let (a, _) = self.actor.sample(&self.obs, &mut self.streams.act)?;
            let out = self.env.step(&a);
            if !out.reward.is_finite() || out.obs.iter().any(|v| !v.is_finite()) {
                return Err(Error::numerical(
                    "environment step",
                    format!("non-finite observation or reward at env step {}", self.env_steps),
                ));
            }
            self.buffer.push(Transition {
                obs: std::mem::take(&mut self.obs),
                action: a,
                reward: out.reward * self.cfg.reward_scale,
                next_obs: out.obs.clone(),
                done: out.done,
                truncated: out.truncated,
            })?;
            self.env_steps += 1;
            self.obs = if out.done {
                self.env.reset(self.streams.env.gen())
            } else {
                out.obs
            };
        }
        if self.buffer.len() >= self.cfg.warm_size.max(1) {
            for _ in 0..self.cfg.updates_per_iteration() {
                self.update()?;
            }
        }
        self.iteration += 1;
        Ok(())
    }

    fn update(&mut self) -> Result<()> {
        let cfg = &self.cfg;
        let batch = self.buffer.sample_batch(cfg.batch_size, &mut self.streams.replay)?;
        let hyper = CriticHyper {
            gamma: cfg.gamma,
            tau: cfg.tau,
            lr: cfg.lr_critic,
        };
        let report = self.procedure.update(
            &mut self.critics,
            &batch,
            &self.actor_target,
            self.temperature.alpha,
            hyper,
            &mut self.streams.target,
        )?;
        self.critic_updates += 1;
        for (i, c) in self.critics.critics.iter().enumerate() {
            if !c.net.is_finite() || !report.stats[i].q_mean.is_finite() {
                return Err(Error::numerical(
                    format!("critic {} after update {}", i + 1, self.critic_updates),
                    format!("q_mean={} b={} omega={}", report.stats[i].q_mean, c.b, c.omega),
                ));
            }
        }
        self.last_critic = Some(report);

        if self.critic_updates.is_multiple_of(cfg.policy_delay) {
            let nets = self.critics.nets();
            let (mut grads, _) = actor_gradient(
                &self.actor,
                batch.obs.view(),
                &nets,
                self.temperature.alpha,
                &mut self.streams.actor,
            )?;
            grads.scale(-1.0);
            self.actor_adam.step(&mut self.actor.net, &grads, cfg.lr_actor)?;
            if !self.actor.net.is_finite() {
                return Err(Error::numerical("actor update", "non-finite policy parameters"));
            }
            let logp = self.actor.sample_logprobs(batch.obs.view(), &mut self.streams.alpha)?;
            self.temperature.update(&logp);
            self.last_entropy = Some(-logp.iter().sum::<f64>() / logp.len() as f64);
            sync_targets(&mut self.critics, cfg.tau)?;
            self.actor_target.net.soft_update_from(&self.actor.net, cfg.tau)?;
            self.actor_updates += 1;
        }
        Ok(())
    }

    /// Evaluate the deterministic policy and append a metrics row.
    pub fn record_metrics(&mut self) -> Result<&MetricsRow> {
        let agent = self.agent();
        let eval = evaluate(&agent, &self.cfg.env, self.cfg.eval_episodes, true, self.cfg.seed)?;
        let bias = if self.cfg.bias_samples > 0 {
            let settings = BiasSettings {
                n_samples: self.cfg.bias_samples,
                n_rollouts: self.cfg.bias_rollouts,
                gamma: self.cfg.gamma,
                reward_scale: self.cfg.reward_scale,
            };
            let report = measure_bias(&agent, &self.cfg.env, settings, &mut self.streams.bias)?;
            let mean = report.mean_bias;
            self.last_bias = Some(report);
            Some(mean)
        } else {
            None
        };
        let (q_mean, sigma_mean) = match &self.last_critic {
            Some(r) => {
                let n = r.stats.len() as f64;
                (
                    Some(r.stats.iter().map(|s| s.q_mean).sum::<f64>() / n),
                    Some(r.stats.iter().map(|s| s.sigma_mean).sum::<f64>() / n),
                )
            }
            None => (None, None),
        };
        let c = &self.critics.critics;
        self.metrics.push(MetricsRow {
            iteration: self.iteration,
            env_steps: self.env_steps,
            avg_return: eval.mean,
            return_std: eval.std,
            q_mean,
            sigma_mean,
            alpha: self.temperature.alpha,
            b1: c[0].b,
            b2: c.get(1).map(|c| c.b),
            omega1: c[0].omega,
            omega2: c.get(1).map(|c| c.omega),
            entropy_estimate: self.last_entropy,
            bias_estimate: bias,
        });
        Ok(self.metrics.last().expect("just pushed"))
    }

    /// Run the remaining iterations, recording metrics every
    /// `eval_interval` iterations and calling `on_checkpoint` at every
    /// checkpoint iteration.
    pub fn run_with(&mut self, mut on_checkpoint: impl FnMut(&Trainer) -> Result<()>) -> Result<()> {
        while self.iteration < self.cfg.total_iterations {
            self.iterate()?;
            let it = self.iteration;
            if it.is_multiple_of(self.cfg.eval_interval) || it == self.cfg.total_iterations {
                self.record_metrics()?;
            }
            if self.cfg.checkpoint_interval > 0 && it.is_multiple_of(self.cfg.checkpoint_interval) {
                on_checkpoint(self)?;
            }
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<()> {
        self.run_with(|_| Ok(()))
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut tensors = BTreeMap::new();
        let mut adam_steps = BTreeMap::new();
        self.actor.net.export("actor", &mut tensors);
        self.actor_target.net.export("actor_target", &mut tensors);
        self.actor_adam.export("actor_adam", &mut tensors);
        adam_steps.insert("actor_adam".to_string(), self.actor_adam.step);
        for (i, c) in self.critics.critics.iter().enumerate() {
            let p = format!("critic{}", i + 1);
            c.net.export(&p, &mut tensors);
            c.target.export(&format!("{p}_target"), &mut tensors);
            c.adam.export(&format!("{p}_adam"), &mut tensors);
            adam_steps.insert(format!("{p}_adam"), c.adam.step);
        }
        Checkpoint {
            format_version: FORMAT_VERSION,
            config: self.cfg.clone(),
            iteration: self.iteration,
            env_steps: self.env_steps,
            critic_updates: self.critic_updates,
            actor_updates: self.actor_updates,
            alpha: self.temperature.alpha,
            target_entropy: self.temperature.target_entropy,
            stats_initialized: self.critics.stats_initialized,
            boundary: self.critics.critics.iter().map(|c| c.b).collect(),
            omega: self.critics.critics.iter().map(|c| c.omega).collect(),
            adam_steps,
            tensors,
            meta: serde_json::json!({
                "build": super::report::build_id(),
                "env": self.spec,
                "variant": self.procedure.variant,
            }),
        }
    }
}
