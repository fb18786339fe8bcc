//! Save a checkpoint, load it back and evaluate it both ways.

use dsact::env::{EnvConfig, EnvName};
use dsact::harness::{evaluate, Checkpoint, RunConfig, Trainer};

fn main() -> dsact::Result<()> {
    let cfg = RunConfig {
        env: EnvConfig::named(EnvName::Pendulum),
        hidden_sizes: vec![32, 32],
        warm_size: 500,
        batch_size: 64,
        lr_critic: 1e-3,
        lr_actor: 1e-3,
        ..RunConfig::default()
    };
    let mut t = Trainer::new(cfg)?;
    for _ in 0..150 {
        t.iterate()?;
    }
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("checkpoint.json");
    t.checkpoint().save(&path)?;

    let ck = Checkpoint::load(&path)?;
    let agent = ck.agent()?;
    println!("checkpoint at iteration {} ({} env steps)", ck.iteration, ck.env_steps);
    for deterministic in [true, false] {
        let r = evaluate(&agent, &ck.config.env, 10, deterministic, ck.config.seed)?;
        let mode = if deterministic { "tanh(mu)" } else { "sampled" };
        println!("{mode:>9}: {:.1} +- {:.1}", r.mean, r.std);
    }
    Ok(())
}
