//! The wheeled-robot tracking task: the scripted reference controller, an
//! untrained policy, and a short training run.

use dsact::env::{reference_controller, EnvConfig, EnvName, Environment, PointRobot};
use dsact::harness::{evaluate, RunConfig, Trainer};

fn main() -> dsact::Result<()> {
    let (mut collisions, mut err, mut n) = (0, 0.0, 0);
    for k in 0..100 {
        let mut env = PointRobot::default();
        env.reset(k);
        let mut hit = false;
        loop {
            let out = env.step(&reference_controller(&env));
            hit |= out.info.collision;
            err += out.info.tracking_error;
            n += 1;
            if out.done {
                break;
            }
        }
        collisions += hit as usize;
    }
    println!(
        "reference controller: {collisions} collisions / 100, lateral error {:.3} m",
        err / n as f64
    );

    let cfg = RunConfig {
        env: EnvConfig::named(EnvName::PointRobot),
        hidden_sizes: vec![64, 64],
        lr_critic: 3e-4,
        lr_actor: 3e-4,
        warm_size: 2000,
        batch_size: 64,
        ..RunConfig::default()
    };
    let mut t = Trainer::new(cfg.clone())?;
    for round in 0..=4 {
        let r = evaluate(&t.agent(), &cfg.env, 20, true, 0)?;
        println!(
            "after {:>6} steps: return {:>8.1}, collisions {:>2}/20, lateral error {:.3} m",
            t.env_steps, r.mean, r.collision_episodes, r.mean_tracking_error
        );
        if round < 4 {
            for _ in 0..250 {
                t.iterate()?;
            }
        }
    }
    Ok(())
}
