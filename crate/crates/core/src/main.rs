use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dsact::env::EnvName;
use dsact::harness::{self, BiasSettings, Checkpoint, RunConfig, Study};
use dsact::rng;

#[derive(Parser)]
#[command(
    name = "dsact",
    version,
    about = "Distributional soft actor-critic training and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a JSON config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Average undiscounted return of a checkpoint's policy.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        /// Sample actions instead of using tanh(mu).
        #[arg(long)]
        stochastic: bool,
    },
    /// Critic estimate minus Monte-Carlo true Q on on-policy samples.
    Bias {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 20)]
        rollouts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a multi-arm, multi-seed study: refinements or reward-scale.
    Ablate {
        #[arg(long)]
        study: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> dsact::Result<()> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if out.is_some() {
                cfg.out_dir = out;
            }
            let outcome = harness::train(&cfg)?;
            if let Some(last) = outcome.metrics().last() {
                println!(
                    "iteration {} env_steps {} avg_return {:.3} alpha {:.4}",
                    last.iteration, last.env_steps, last.avg_return, last.alpha
                );
            }
            if let Some(dir) = &outcome.out_dir {
                println!("artifacts in {}", dir.display());
            }
        }
        Command::Eval {
            checkpoint,
            episodes,
            stochastic,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let agent = ck.agent()?;
            let r = harness::evaluate(&agent, &ck.config.env, episodes, !stochastic, ck.config.seed)?;
            println!("avg_return {:.6} +- {:.6} over {} episodes", r.mean, r.std, episodes);
            if ck.config.env.name == EnvName::PointRobot {
                println!(
                    "collision_episodes {} mean_lateral_error {:.6}",
                    r.collision_episodes, r.mean_tracking_error
                );
            }
        }
        Command::Bias {
            checkpoint,
            samples,
            rollouts,
            seed,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let agent = ck.agent()?;
            let settings = BiasSettings {
                n_samples: samples,
                n_rollouts: rollouts,
                gamma: ck.config.gamma,
                reward_scale: ck.config.reward_scale,
            };
            let mut r = rng::stream(seed, "bias-cli");
            let report = harness::measure_bias(&agent, &ck.config.env, settings, &mut r)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Ablate { study, config, out } => {
            let study: Study = study.parse()?;
            let cfg = RunConfig::load(&config)?;
            let out = out.or_else(|| cfg.out_dir.clone());
            let report = harness::run_ablation(study, &cfg, out.as_deref())?;
            for a in &report.arms {
                println!(
                    "{:<24} final {:>10.3}  auc {:>10.3}  mid-var {:>10.3}",
                    a.name, a.mean_final_return, a.mean_area_under_curve, a.mid_training_variance
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
