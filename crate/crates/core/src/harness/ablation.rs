use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::variants::CriticFamily;

use super::config::RunConfig;
use super::report::{line_chart, train, Series};
use super::trainer::MetricsRow;

/// Reward scales of the reward-scale study.
pub const REWARD_SCALES: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    /// Full algorithm against removing expected-value substitution or the
    /// twin distributions.
    Refinements,
    /// Adaptive against fixed boundary across reward scales.
    RewardScale,
}

impl FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "refinements" => Ok(Study::Refinements),
            "reward-scale" => Ok(Study::RewardScale),
            _ => Err(Error::config(format!(
                "unknown study {s:?}; expected refinements or reward-scale"
            ))),
        }
    }
}

/// One configuration of a study, run once per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub name: String,
    pub config: RunConfig,
}

/// The arms of `study` derived from `base`. Seeds come from `base.seeds`.
pub fn study_arms(study: Study, base: &RunConfig) -> Vec<Arm> {
    let mut dsact = base.clone();
    dsact.algorithm = CriticFamily::Dsact;
    dsact.expected_value_substitution = None;
    dsact.twin_distributions = None;
    dsact.variance_adjustment = None;
    match study {
        Study::Refinements => {
            let mut no_evs = dsact.clone();
            no_evs.expected_value_substitution = Some(false);
            let mut single = dsact.clone();
            single.twin_distributions = Some(false);
            vec![
                Arm {
                    name: "full".into(),
                    config: dsact,
                },
                Arm {
                    name: "no-evs".into(),
                    config: no_evs,
                },
                Arm {
                    name: "single-distribution".into(),
                    config: single,
                },
            ]
        }
        Study::RewardScale => {
            let mut arms = vec![];
            for (label, adaptive) in [("adaptive", true), ("fixed-b", false)] {
                for scale in REWARD_SCALES {
                    let mut c = dsact.clone();
                    c.reward_scale = scale;
                    if !adaptive {
                        c.variance_adjustment = Some(false);
                    }
                    arms.push(Arm {
                        name: format!("{label}-scale-{scale}"),
                        config: c,
                    });
                }
            }
            arms
        }
    }
}

/// Learning-curve statistics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub seed: u64,
    pub final_return: f64,
    /// Mean evaluation return over all metric rows.
    pub area_under_curve: f64,
    pub returns: Vec<f64>,
    pub env_steps: Vec<usize>,
}

impl RunStats {
    pub fn from_metrics(seed: u64, rows: &[MetricsRow]) -> Self {
        let returns: Vec<f64> = rows.iter().map(|r| r.avg_return).collect();
        RunStats {
            seed,
            final_return: returns.last().copied().unwrap_or(f64::NAN),
            area_under_curve: returns.iter().sum::<f64>() / returns.len().max(1) as f64,
            env_steps: rows.iter().map(|r| r.env_steps).collect(),
            returns,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub name: String,
    pub config: RunConfig,
    pub runs: Vec<RunStats>,
    pub mean_final_return: f64,
    pub mean_area_under_curve: f64,
    /// Across-seed variance of the return at the middle metric row.
    pub mid_training_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub study: Study,
    pub arms: Vec<ArmReport>,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n.max(1) as f64
}

/// Sample variance across seeds of the return at the middle metric row.
pub fn mid_training_variance(runs: &[RunStats]) -> f64 {
    let vals: Vec<f64> = runs
        .iter()
        .filter(|r| !r.returns.is_empty())
        .map(|r| r.returns[(r.returns.len() - 1) / 2])
        .collect();
    if vals.len() < 2 {
        return 0.0;
    }
    let m = mean(vals.iter().copied());
    vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() - 1) as f64
}

impl ArmReport {
    pub fn new(name: String, config: RunConfig, runs: Vec<RunStats>) -> Self {
        ArmReport {
            mean_final_return: mean(runs.iter().map(|r| r.final_return)),
            mean_area_under_curve: mean(runs.iter().map(|r| r.area_under_curve)),
            mid_training_variance: mid_training_variance(&runs),
            name,
            config,
            runs,
        }
    }
}

/// Run `jobs` on up to `available_parallelism` worker threads, keeping
/// results in job order. Workers share nothing but the job counter.
pub fn run_parallel<T: Send, J: Sync>(jobs: &[J], f: impl Fn(&J) -> T + Sync) -> Vec<T> {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(jobs.len())
        .max(1);
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let r = f(&jobs[i]);
                *slots[i].lock().expect("no worker panics while holding a slot") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every job ran"))
        .collect()
}

/// Run every arm of `study` over `base.seeds`. With `out_dir`, each run
/// writes its artifacts under `<out_dir>/<arm>/seed_<seed>/` and the study
/// writes `ablation.json`, `ablation.csv` and `curves.svg`.
pub fn run_ablation(study: Study, base: &RunConfig, out_dir: Option<&Path>) -> Result<AblationReport> {
    base.validate()?;
    let arms = study_arms(study, base);
    let jobs: Vec<(usize, RunConfig)> = arms
        .iter()
        .enumerate()
        .flat_map(|(k, arm)| {
            base.seeds.iter().map(move |&seed| {
                let mut c = arm.config.clone();
                c.seed = seed;
                c.out_dir = out_dir.map(|d| d.join(&arm.name).join(format!("seed_{seed}")));
                (k, c)
            })
        })
        .collect();
    let results = run_parallel(&jobs, |(_, c)| {
        train(c).map(|o| RunStats::from_metrics(c.seed, o.metrics()))
    });
    let mut per_arm: Vec<Vec<RunStats>> = vec![vec![]; arms.len()];
    for ((k, _), r) in jobs.iter().zip(results) {
        per_arm[*k].push(r?);
    }
    let report = AblationReport {
        study,
        arms: arms
            .into_iter()
            .zip(per_arm)
            .map(|(a, runs)| ArmReport::new(a.name, a.config, runs))
            .collect(),
    };
    if let Some(dir) = out_dir {
        write_report(&report, dir)?;
    }
    Ok(report)
}

/// Seed-averaged return curves of every arm.
pub fn mean_curves(report: &AblationReport) -> Vec<Series> {
    report
        .arms
        .iter()
        .map(|a| {
            let n = a.runs.iter().map(|r| r.returns.len()).min().unwrap_or(0);
            let points = (0..n)
                .map(|i| (a.runs[0].env_steps[i] as f64, mean(a.runs.iter().map(|r| r.returns[i]))))
                .collect();
            Series {
                name: a.name.clone(),
                points,
            }
        })
        .collect()
}

fn write_report(report: &AblationReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join("ablation.json");
    std::fs::write(&json, serde_json::to_string_pretty(report)?).map_err(|e| Error::io(&json, e))?;
    let mut csv =
        String::from("arm,reward_scale,seeds,mean_final_return,mean_area_under_curve,mid_training_variance\n");
    for a in &report.arms {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            a.name,
            a.config.reward_scale,
            a.runs.len(),
            a.mean_final_return,
            a.mean_area_under_curve,
            a.mid_training_variance
        ));
    }
    let path = dir.join("ablation.csv");
    std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    let svg = line_chart(&[("mean evaluation return", mean_curves(report))], "environment steps");
    let path = dir.join("curves.svg");
    std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))
}
