//! The refinements study on a short pendulum budget: full algorithm, no
//! expected-value substitution, and a single distribution.
//!
//! Three arms times three seeds; several minutes on one core.

use dsact::harness::{run_ablation, RunConfig, Study};

fn main() -> dsact::Result<()> {
    let base = RunConfig {
        hidden_sizes: vec![64, 64],
        lr_critic: 3e-4,
        lr_actor: 3e-4,
        warm_size: 1000,
        batch_size: 64,
        total_iterations: 600,
        eval_interval: 25,
        seeds: vec![1, 2, 3],
        ..RunConfig::default()
    };
    let out = std::env::args().nth(1).unwrap_or_else(|| "runs/refinements".into());
    let report = run_ablation(Study::Refinements, &base, Some(out.as_ref()))?;
    for arm in &report.arms {
        println!(
            "{:<20} final {:>8.1}  auc {:>8.1}  mid-training variance {:>10.0}",
            arm.name, arm.mean_final_return, arm.mean_area_under_curve, arm.mid_training_variance
        );
    }
    println!("curves in {out}/curves.svg");
    Ok(())
}
