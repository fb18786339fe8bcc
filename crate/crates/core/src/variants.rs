//! Baseline critics and ablation switches.
//!
//! Three critic families share the same network trunk:
//!
//! - `dsact`: twin value distributions, expected-value substitution in the
//!   mean term, adaptive boundary and gradient scale. Individual switches
//!   can be turned off for ablations.
//! - `dsacv1`: one value distribution, the random target in the mean term,
//!   a fixed clipping boundary `b = 20` and no gradient scaling.
//! - `sac`: squared TD error on the mean head (the spread head is unused),
//!   twin critics with min-target by default or a single critic.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::actor::Actor;
use crate::critic::{
    nll_coeffs, update_with_rule, Boundary, CriticHyper, CriticLoss, CriticPairState, CriticUpdateReport, GradCoeffs,
    UpdateRule,
};
use crate::error::{Error, Result};
use crate::replay::Batch;

/// Boundary used by the fixed-boundary critics.
pub const DSACV1_BOUNDARY: f64 = 20.0;

/// Lowest `sigma` the unguarded kernel divides by.
pub const SIGMA_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticFamily {
    Dsact,
    Dsacv1,
    Sac,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantConfig {
    pub critic_family: CriticFamily,
    pub expected_value_substitution: bool,
    /// Twin critics with min-selection; for `sac` this is clipped double-Q.
    pub twin_distributions: bool,
    pub variance_adjustment: bool,
    /// Boundary used when `variance_adjustment` is off.
    pub fixed_boundary_b: f64,
}

impl VariantConfig {
    pub fn dsact() -> Self {
        VariantConfig {
            critic_family: CriticFamily::Dsact,
            expected_value_substitution: true,
            twin_distributions: true,
            variance_adjustment: true,
            fixed_boundary_b: DSACV1_BOUNDARY,
        }
    }

    pub fn dsacv1() -> Self {
        VariantConfig {
            critic_family: CriticFamily::Dsacv1,
            expected_value_substitution: false,
            twin_distributions: false,
            variance_adjustment: false,
            fixed_boundary_b: DSACV1_BOUNDARY,
        }
    }

    pub fn sac(twin: bool) -> Self {
        VariantConfig {
            critic_family: CriticFamily::Sac,
            expected_value_substitution: false,
            twin_distributions: twin,
            variance_adjustment: false,
            fixed_boundary_b: DSACV1_BOUNDARY,
        }
    }

    /// Family defaults for `family`.
    pub fn for_family(family: CriticFamily) -> Self {
        match family {
            CriticFamily::Dsact => VariantConfig::dsact(),
            CriticFamily::Dsacv1 => VariantConfig::dsacv1(),
            CriticFamily::Sac => VariantConfig::sac(true),
        }
    }

    pub fn is_distributional(&self) -> bool {
        self.critic_family != CriticFamily::Sac
    }

    pub fn num_critics(&self) -> usize {
        if self.twin_distributions {
            2
        } else {
            1
        }
    }
}

/// The pre-refinement kernel: random target in the mean term, no guard,
/// no scale.
pub fn grad_coeffs_v1(y_z: f64, y_z_clipped: f64, q: f64, sigma: f64) -> GradCoeffs {
    nll_coeffs(y_z, y_z_clipped, q, sigma.max(SIGMA_FLOOR), 0.0)
}

/// Coefficient of `grad Q` for the loss `(y_q - q)^2 / 2`.
pub fn grad_coeff_sac(y_q: f64, q: f64) -> f64 {
    -(y_q - q)
}

/// A critic-update procedure composed from a [`VariantConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticProcedure {
    pub variant: VariantConfig,
    pub rule: UpdateRule,
}

impl CriticProcedure {
    pub fn update<R: Rng + ?Sized>(
        &self,
        state: &mut CriticPairState,
        batch: &Batch,
        actor_target: &Actor,
        alpha: f64,
        hyper: CriticHyper,
        rng: &mut R,
    ) -> Result<CriticUpdateReport> {
        update_with_rule(state, batch, actor_target, alpha, self.rule, hyper, rng)
    }
}

/// Compose kernel, target rule, boundary rule and scaling from the flags.
pub fn build_variant(cfg: VariantConfig, xi: f64, eps: f64, eps_omega: f64) -> Result<CriticProcedure> {
    let needs_fixed_b = cfg.is_distributional() && !cfg.variance_adjustment;
    if needs_fixed_b && !(cfg.fixed_boundary_b > 0.0 && cfg.fixed_boundary_b.is_finite()) {
        return Err(Error::config("fixed_boundary_b must be positive"));
    }
    match cfg.critic_family {
        CriticFamily::Dsacv1
            if cfg.expected_value_substitution || cfg.twin_distributions || cfg.variance_adjustment =>
        {
            return Err(Error::config(
                "dsacv1 has no refinements; use algorithm dsact with ablation flags instead",
            ));
        }
        CriticFamily::Sac if cfg.expected_value_substitution || cfg.variance_adjustment => {
            return Err(Error::config(
                "sac critics are not distributional; expected_value_substitution and variance_adjustment do not apply",
            ));
        }
        _ => {}
    }
    if cfg.variance_adjustment && !(xi > 0.0 && eps >= 0.0 && eps_omega >= 0.0) {
        return Err(Error::config("xi must be positive and eps, eps_omega non-negative"));
    }
    let loss = if cfg.is_distributional() {
        CriticLoss::Distributional {
            expected_value_substitution: cfg.expected_value_substitution,
            boundary: if cfg.variance_adjustment {
                Boundary::Adaptive { xi, eps, eps_omega }
            } else {
                Boundary::Fixed {
                    b: cfg.fixed_boundary_b,
                }
            },
        }
    } else {
        CriticLoss::Mse
    };
    Ok(CriticProcedure {
        variant: cfg,
        rule: UpdateRule {
            twin: cfg.twin_distributions,
            loss,
        },
    })
}
