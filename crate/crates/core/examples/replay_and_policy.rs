//! Replay buffer and the squashed Gaussian policy on their own.

use dsact::actor::Actor;
use dsact::replay::{ReplayBuffer, Transition};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dsact::Result<()> {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let actor = Actor::new(2, 1, &[16, 16], &mut r)?;
    let mut buf = ReplayBuffer::new(5, 2, 1)?;
    for k in 0..8 {
        let obs = vec![k as f64 * 0.1, 1.0];
        let (a, logp) = actor.sample(&obs, &mut r)?;
        println!(
            "obs[0] {:.1}: action {:+.3} (mode {:+.3}), log-prob {logp:.3}",
            obs[0],
            a[0],
            actor.mode(&obs)?[0]
        );
        buf.push(Transition {
            obs: obs.clone(),
            action: a,
            reward: -(k as f64),
            next_obs: vec![(k + 1) as f64 * 0.1, 1.0],
            done: false,
            truncated: k == 7,
        })?;
    }
    // Capacity 5: the first three transitions were evicted.
    let kept: Vec<f64> = buf.iter_fifo().map(|t| t.reward).collect();
    println!("buffer keeps rewards {kept:?}");
    let batch = buf.sample_batch(4, &mut r)?;
    println!("sampled rewards {:?}", batch.reward);
    Ok(())
}
