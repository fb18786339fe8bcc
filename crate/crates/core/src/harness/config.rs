use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, EnvName};
use crate::error::{Error, Result};
use crate::variants::{CriticFamily, VariantConfig, DSACV1_BOUNDARY};

/// Seeds used by multi-seed studies unless overridden.
pub const DEFAULT_SEEDS: [u64; 5] = [12345, 22345, 32345, 42345, 52345];

/// Every knob of a training run. Serialized as JSON; unknown keys are
/// rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub algorithm: CriticFamily,
    /// Overrides of the family defaults, used for ablations.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_value_substitution: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub twin_distributions: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_adjustment: Option<bool>,
    pub fixed_boundary_b: f64,

    pub env: EnvConfig,
    pub hidden_sizes: Vec<usize>,

    pub gamma: f64,
    pub tau: f64,
    pub lr_critic: f64,
    pub lr_actor: f64,
    pub lr_alpha: f64,
    /// Defaults to `-act_dim`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_entropy: Option<f64>,
    pub alpha_init: f64,
    pub xi: f64,
    pub eps: f64,
    pub eps_omega: f64,

    pub policy_delay: usize,
    pub samples_per_iteration: usize,
    /// Defaults to `samples_per_iteration`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub updates_per_iteration: Option<usize>,
    pub warm_size: usize,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub total_iterations: usize,

    /// Iterations between metric rows (each row runs an evaluation).
    pub eval_interval: usize,
    pub eval_episodes: usize,
    /// Iterations between intermediate checkpoints; 0 writes only the
    /// initial and final ones.
    pub checkpoint_interval: usize,
    /// Bias samples per metric row; 0 disables bias tracking.
    pub bias_samples: usize,
    pub bias_rollouts: usize,

    pub seed: u64,
    /// Seeds for multi-seed studies.
    pub seeds: Vec<u64>,
    pub reward_scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            algorithm: CriticFamily::Dsact,
            expected_value_substitution: None,
            twin_distributions: None,
            variance_adjustment: None,
            fixed_boundary_b: DSACV1_BOUNDARY,
            env: EnvConfig::named(EnvName::Pendulum),
            hidden_sizes: vec![256, 256, 256],
            gamma: 0.99,
            tau: 0.005,
            lr_critic: 1e-4,
            lr_actor: 1e-4,
            lr_alpha: 3e-4,
            target_entropy: None,
            alpha_init: 1.0,
            xi: 3.0,
            eps: 0.1,
            eps_omega: 0.1,
            policy_delay: 2,
            samples_per_iteration: 20,
            updates_per_iteration: None,
            warm_size: 10_000,
            buffer_capacity: 1_000_000,
            batch_size: 256,
            total_iterations: 7_500,
            eval_interval: 250,
            eval_episodes: 5,
            checkpoint_interval: 0,
            bias_samples: 0,
            bias_rollouts: 20,
            seed: DEFAULT_SEEDS[0],
            seeds: DEFAULT_SEEDS.to_vec(),
            reward_scale: 1.0,
            out_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Family defaults with any explicit overrides applied.
    pub fn variant(&self) -> VariantConfig {
        let mut v = VariantConfig::for_family(self.algorithm);
        if let Some(x) = self.expected_value_substitution {
            v.expected_value_substitution = x;
        }
        if let Some(x) = self.twin_distributions {
            v.twin_distributions = x;
        }
        if let Some(x) = self.variance_adjustment {
            v.variance_adjustment = x;
        }
        v.fixed_boundary_b = self.fixed_boundary_b;
        v
    }

    /// Short name of the critic variant, e.g. `dsact`, `dsact-no-evs`.
    pub fn algorithm_label(&self) -> String {
        let v = self.variant();
        let mut name = match self.algorithm {
            CriticFamily::Dsact => "dsact",
            CriticFamily::Dsacv1 => "dsacv1",
            CriticFamily::Sac if v.twin_distributions => "sac",
            CriticFamily::Sac => "sac-no-min",
        }
        .to_string();
        if self.algorithm == CriticFamily::Dsact {
            if !v.expected_value_substitution {
                name.push_str("-no-evs");
            }
            if !v.twin_distributions {
                name.push_str("-single");
            }
            if !v.variance_adjustment {
                name.push_str("-fixed-b");
            }
        }
        name
    }

    pub fn updates_per_iteration(&self) -> usize {
        self.updates_per_iteration.unwrap_or(self.samples_per_iteration)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config(m.to_string()));
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        for (name, v) in [
            ("lr_critic", self.lr_critic),
            ("lr_actor", self.lr_actor),
            ("lr_alpha", self.lr_alpha),
            ("reward_scale", self.reward_scale),
            ("alpha_init", self.alpha_init),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if self.hidden_sizes.contains(&0) {
            return bad("hidden layer widths must be positive");
        }
        if self.policy_delay == 0 || self.samples_per_iteration == 0 || self.batch_size == 0 {
            return bad("policy_delay, samples_per_iteration and batch_size must be at least 1");
        }
        if self.buffer_capacity == 0 || self.warm_size > self.buffer_capacity {
            return bad("need 0 < warm_size <= buffer_capacity");
        }
        if self.eval_interval == 0 || self.eval_episodes == 0 {
            return bad("eval_interval and eval_episodes must be at least 1");
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty");
        }
        if let Some(h) = self.target_entropy {
            if !h.is_finite() {
                return bad("target_entropy must be finite");
            }
        }
        crate::variants::build_variant(self.variant(), self.xi, self.eps, self.eps_omega)?;
        self.env.build()?;
        Ok(())
    }
}
