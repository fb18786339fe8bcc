use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::actor::Actor;
use crate::error::{Error, Result};
use crate::numerics::{AdamState, Mlp, Tensor};

use super::config::RunConfig;

pub const FORMAT_VERSION: u32 = 1;

/// Everything needed to evaluate or inspect a run at one iteration.
///
/// Floats are written in shortest round-trip form, so save followed by
/// load reproduces every parameter bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: RunConfig,
    pub iteration: usize,
    pub env_steps: usize,
    pub critic_updates: usize,
    pub actor_updates: usize,
    pub alpha: f64,
    pub target_entropy: f64,
    pub stats_initialized: bool,
    /// Per-critic clipping boundary `b_i`.
    pub boundary: Vec<f64>,
    /// Per-critic gradient scale `omega_i`.
    pub omega: Vec<f64>,
    pub adam_steps: BTreeMap<String, u64>,
    pub tensors: BTreeMap<String, Tensor>,
    pub meta: serde_json::Value,
}

/// The parts of a run used for acting and value estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub actor: Actor,
    pub critics: Vec<Mlp>,
    pub alpha: f64,
}

impl Agent {
    /// `min_i Q_i(s, a)` over the agent's critics.
    pub fn q_estimate(&self, obs: &[f64], act: &[f64]) -> Result<f64> {
        let mut x = obs.to_vec();
        x.extend_from_slice(act);
        let mut best = f64::INFINITY;
        for c in &self.critics {
            let (out, _) = c.forward_one(&x)?;
            best = best.min(out[0]);
        }
        Ok(best)
    }
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::config(format!("checkpoint: {e}")))?;
        if ck.format_version != FORMAT_VERSION {
            return Err(Error::config(format!(
                "checkpoint format {} is not supported (expected {FORMAT_VERSION})",
                ck.format_version
            )));
        }
        Ok(ck)
    }

    fn n_layers(&self) -> usize {
        self.config.hidden_sizes.len() + 1
    }

    pub fn net(&self, prefix: &str) -> Result<Mlp> {
        Mlp::import(prefix, self.n_layers(), &self.tensors)
    }

    pub fn adam(&self, prefix: &str, net: &Mlp) -> Result<AdamState> {
        let step = *self
            .adam_steps
            .get(prefix)
            .ok_or_else(|| Error::config(format!("checkpoint has no optimizer step for {prefix}")))?;
        AdamState::import(prefix, net, step, &self.tensors)
    }

    pub fn agent(&self) -> Result<Agent> {
        let actor = Actor::from_net(self.net("actor")?)?;
        let critics = (0..self.boundary.len())
            .map(|i| self.net(&format!("critic{}", i + 1)))
            .collect::<Result<Vec<_>>>()?;
        if critics.is_empty() {
            return Err(Error::config("checkpoint has no critic"));
        }
        Ok(Agent {
            actor,
            critics,
            alpha: self.alpha,
        })
    }
}
