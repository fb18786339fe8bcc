//! Training loop, evaluation, bias measurement, ablation studies and run
//! artifacts.

pub mod ablation;
pub mod checkpoint;
pub mod config;
pub mod report;
pub mod trainer;

pub use ablation::{run_ablation, study_arms, AblationReport, Arm, ArmReport, RunStats, Study, REWARD_SCALES};
pub use checkpoint::{Agent, Checkpoint};
pub use config::{RunConfig, DEFAULT_SEEDS};
pub use report::{metrics_csv, parse_metrics_csv, train, TrainOutcome};
pub use trainer::{
    evaluate, measure_bias, run_episodes, BiasSettings, EvalResult, MetricsRow, Trainer, EVAL_SEED_BASE,
};
