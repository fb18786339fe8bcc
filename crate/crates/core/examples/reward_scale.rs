//! Adaptive against fixed clipping boundary as rewards are rescaled.
//!
//! Evaluation returns are always reported unscaled.

use dsact::harness::{train, RunConfig};

fn main() -> dsact::Result<()> {
    for adaptive in [true, false] {
        for scale in [0.01, 1.0, 100.0] {
            let cfg = RunConfig {
                hidden_sizes: vec![64, 64],
                lr_critic: 3e-4,
                lr_actor: 3e-4,
                warm_size: 1000,
                batch_size: 64,
                total_iterations: 500,
                eval_interval: 50,
                reward_scale: scale,
                variance_adjustment: (!adaptive).then_some(false),
                ..RunConfig::default()
            };
            let out = train(&cfg)?;
            let last = out.metrics().last().unwrap();
            println!(
                "{:<14} scale {scale:>6}: return {:>8.1}  b {:>10.3}  omega {:>12.4}",
                cfg.algorithm_label(),
                last.avg_return,
                last.b1,
                last.omega1
            );
        }
    }
    Ok(())
}
