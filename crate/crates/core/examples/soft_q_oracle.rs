//! Ground truth on the bandit chain: backward induction against
//! Monte-Carlo rollouts of the same Boltzmann policy.

use dsact::env::{BanditChain, Environment};
use dsact::oracles::{mc_true_q, numeric_soft_q, BoltzmannPolicy, McSettings};
use rand::SeedableRng;

fn main() -> dsact::Result<()> {
    let chain = BanditChain::new(0.5);
    let (alpha, gamma) = (0.2, 0.9);
    let table = numeric_soft_q(&chain, alpha, gamma, 1e-3)?;
    let policy = BoltzmannPolicy::new(table.clone())?;
    let settings = McSettings {
        n_rollouts: 5000,
        gamma,
        alpha,
        reward_scale: 1.0,
    };
    let mut r = dsact::rng::Rng::seed_from_u64(1);
    println!("state  action   table Q   rollout Q   +-sem   return std");
    for s in 0..3 {
        for a in [-0.5, 0.0, 0.5] {
            let mut env = chain.clone();
            env.reset(s as u64);
            env.set_state(s);
            let est = mc_true_q(&env, &policy, &[a], settings, &mut r)?;
            println!(
                "{s:>5} {a:>7.2} {:>9.4} {:>11.4} {:>7.4} {:>12.4}",
                table.q_at(s, a),
                est.mean,
                est.std_err,
                table.std_at(s, a)
            );
        }
    }
    Ok(())
}
