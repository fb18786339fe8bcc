//! Q-estimation bias on the noisy bandit chain for three critics: a single
//! MSE critic, the fixed-boundary distributional critic and the refined
//! twin-distribution critic.
//!
//! Bias is the critic's estimate minus a Monte-Carlo soft return from the
//! same state and action; negative means underestimation.

use dsact::env::{EnvConfig, EnvName};
use dsact::harness::{measure_bias, BiasSettings, RunConfig, Trainer};
use dsact::variants::CriticFamily;

fn main() -> dsact::Result<()> {
    let mut env = EnvConfig::named(EnvName::BanditChain);
    env.noise_std = Some(0.5);
    for (family, twin) in [
        (CriticFamily::Sac, Some(false)),
        (CriticFamily::Dsacv1, None),
        (CriticFamily::Dsact, None),
    ] {
        let cfg = RunConfig {
            algorithm: family,
            twin_distributions: twin,
            env: env.clone(),
            gamma: 0.9,
            hidden_sizes: vec![64, 64],
            lr_critic: 3e-4,
            lr_actor: 3e-4,
            warm_size: 300,
            batch_size: 64,
            eval_interval: 1_000_000,
            ..RunConfig::default()
        };
        let label = cfg.algorithm_label();
        let mut t = Trainer::new(cfg.clone())?;
        while t.critic_updates < 5000 {
            t.iterate()?;
        }
        let settings = BiasSettings {
            n_samples: 200,
            n_rollouts: 20,
            gamma: cfg.gamma,
            reward_scale: 1.0,
        };
        let b = measure_bias(&t.agent(), &cfg.env, settings, &mut dsact::rng::stream(1, "bias"))?;
        println!("{label:>12}: bias {:+.4} +- {:.4}", b.mean_bias, b.std_err);
    }
    Ok(())
}
