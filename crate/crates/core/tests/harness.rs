mod common;

use std::fs;

use common::constant_net;
use dsact::actor::Actor;
use dsact::env::{EnvConfig, EnvName, Environment};
use dsact::harness::{
    evaluate, metrics_csv, parse_metrics_csv, run_ablation, run_episodes, train, Agent, Checkpoint, RunConfig, Study,
    Trainer,
};
use dsact::rng;
use dsact::Error;
use rand::Rng;

fn small(env: EnvName) -> RunConfig {
    RunConfig {
        env: EnvConfig::named(env),
        hidden_sizes: vec![8, 8],
        lr_critic: 1e-3,
        lr_actor: 1e-3,
        warm_size: 40,
        batch_size: 16,
        samples_per_iteration: 10,
        total_iterations: 12,
        eval_interval: 4,
        eval_episodes: 2,
        seeds: vec![1, 2],
        ..RunConfig::default()
    }
}

fn files(dir: &std::path::Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

#[test]
fn identical_runs_write_identical_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(EnvName::Pendulum);
    cfg.bias_samples = 2;
    cfg.bias_rollouts = 2;
    let read = |cfg: &RunConfig, name: &str| {
        let mut cfg = cfg.clone();
        cfg.out_dir = Some(tmp.path().join(name));
        train(&cfg).unwrap();
        fs::read(tmp.path().join(name).join("metrics.csv")).unwrap()
    };
    let (a, b) = (read(&cfg, "a"), read(&cfg, "b"));
    assert_eq!(a, b);
    let rows = parse_metrics_csv(std::str::from_utf8(&a).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.bias_estimate.is_some()));
    assert_eq!(metrics_csv(&rows).as_bytes(), &a[..]);

    cfg.seed += 1;
    assert_ne!(read(&cfg, "c"), a);
}

#[test]
fn zero_iterations_write_config_and_initial_checkpoint_only() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(EnvName::Pendulum);
    cfg.total_iterations = 0;
    cfg.out_dir = Some(tmp.path().to_path_buf());
    let out = train(&cfg).unwrap();
    assert!(out.metrics().is_empty());
    assert_eq!(files(tmp.path()), vec!["checkpoint_0.json", "config.json"]);
    let echoed = RunConfig::load(&tmp.path().join("config.json")).unwrap();
    assert_eq!(echoed, cfg);
}

#[test]
fn full_run_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(EnvName::BanditChain);
    cfg.checkpoint_interval = 6;
    cfg.out_dir = Some(tmp.path().to_path_buf());
    train(&cfg).unwrap();
    assert_eq!(
        files(tmp.path()),
        vec![
            "checkpoint_0.json",
            "checkpoint_12.json",
            "checkpoint_6.json",
            "config.json",
            "curves.svg",
            "metrics.csv",
            "summary.json"
        ]
    );
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["fixture"]["states"], 3);
    assert!(summary["build"].as_str().is_some_and(|s| !s.is_empty()));
    let svg = fs::read_to_string(tmp.path().join("curves.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
}

#[test]
fn step_accounting_cadence_and_warm_up() {
    let mut cfg = small(EnvName::Pendulum);
    cfg.warm_size = 35;
    cfg.policy_delay = 3;
    cfg.updates_per_iteration = Some(7);
    let mut t = Trainer::new(cfg.clone()).unwrap();
    let initial = t.checkpoint();
    // Buffer holds 10, 20, 30 after the first three iterations: no updates.
    for k in 1..=3 {
        t.iterate().unwrap();
        assert_eq!(t.env_steps, k * cfg.samples_per_iteration);
        assert_eq!(t.critic_updates, 0);
    }
    let now = t.checkpoint();
    assert_eq!(now.tensors, initial.tensors);
    assert_eq!(now.alpha, initial.alpha);
    for k in 4..=9 {
        t.iterate().unwrap();
        assert_eq!(t.env_steps, t.iteration * cfg.samples_per_iteration);
        assert_eq!(t.critic_updates, (k - 3) * 7);
        assert_eq!(t.actor_updates, t.critic_updates / 3);
    }
    assert_ne!(t.checkpoint().tensors, initial.tensors);
}

#[test]
fn checkpoint_round_trips_bit_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let mut t = Trainer::new(small(EnvName::PointRobot)).unwrap();
    for _ in 0..6 {
        t.iterate().unwrap();
    }
    let ck = t.checkpoint();
    let path = tmp.path().join("ck.json");
    ck.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, ck);
    let again = tmp.path().join("ck2.json");
    back.save(&again).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());

    let (a, b) = (t.agent(), back.agent().unwrap());
    let mut r = rng::stream(0, "probe");
    for _ in 0..20 {
        let obs: Vec<f64> = (0..9).map(|_| r.gen_range(-1.0..1.0)).collect();
        let act = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
        assert_eq!(
            a.q_estimate(&obs, &act).unwrap().to_bits(),
            b.q_estimate(&obs, &act).unwrap().to_bits()
        );
        assert_eq!(a.actor.mode(&obs).unwrap(), b.actor.mode(&obs).unwrap());
    }
}

#[test]
fn checkpoint_version_and_unknown_keys_are_checked() {
    let tmp = tempfile::tempdir().unwrap();
    let ck = Trainer::new(small(EnvName::BanditChain)).unwrap().checkpoint();
    let mut v = serde_json::to_value(&ck).unwrap();
    v["format_version"] = 99.into();
    let path = tmp.path().join("v.json");
    fs::write(&path, v.to_string()).unwrap();
    assert!(Checkpoint::load(&path).is_err());
    let mut v = serde_json::to_value(&ck).unwrap();
    v["surprise"] = 1.into();
    fs::write(&path, v.to_string()).unwrap();
    assert!(Checkpoint::load(&path).is_err());
}

fn zero_agent(obs_dim: usize) -> Agent {
    Agent {
        actor: Actor::from_net(constant_net(obs_dim, &[0.0, 0.0])).unwrap(),
        critics: vec![constant_net(obs_dim + 1, &[0.0, 0.0])],
        alpha: 0.1,
    }
}

#[test]
fn zero_policy_upright_pendulum_earns_nothing() {
    let agent = zero_agent(3);
    let mut env = EnvConfig::named(EnvName::Pendulum).build().unwrap();
    let r = run_episodes(
        &mut env,
        3,
        0,
        |e| {
            if let dsact::env::Env::Pendulum(p) = e {
                p.set_state(0.0, 0.0);
            }
        },
        |obs| agent.actor.mode(obs),
    )
    .unwrap();
    assert!(r.mean.abs() < 1e-12);
    assert_eq!(r.std, 0.0);
}

#[test]
fn single_episode_has_zero_spread() {
    let r = evaluate(&zero_agent(3), &EnvConfig::named(EnvName::Pendulum), 1, true, 0).unwrap();
    assert_eq!(r.returns.len(), 1);
    assert_eq!(r.std, 0.0);
    assert!(evaluate(&zero_agent(3), &EnvConfig::named(EnvName::Pendulum), 0, true, 0).is_err());
}

#[test]
fn evaluation_checks_dimensions() {
    let e = evaluate(&zero_agent(9), &EnvConfig::named(EnvName::Pendulum), 1, true, 0).unwrap_err();
    assert!(matches!(e, Error::Config(_)));
}

/// Pinned from the first run of this test: uniform random actions over 100
/// episodes average -1257.0.
#[test]
fn random_policy_lands_in_the_expected_band() {
    let mut env = EnvConfig::named(EnvName::Pendulum).build().unwrap();
    let mut r = rng::stream(0, "random-policy");
    let res = run_episodes(&mut env, 100, 0, |_| {}, |_| Ok(vec![r.gen_range(-1.0..1.0)])).unwrap();
    assert!((-2000.0..=-800.0).contains(&res.mean), "{}", res.mean);
    assert!(res.returns.iter().all(|&x| x <= 0.0));
}

#[test]
fn numerical_failure_halts_with_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(EnvName::Pendulum);
    cfg.lr_critic = 1e300;
    cfg.lr_actor = 1e300;
    cfg.out_dir = Some(tmp.path().to_path_buf());
    let e = train(&cfg).unwrap_err();
    assert_eq!(e.exit_code(), 3, "{e}");
    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("diagnostics.json")).unwrap()).unwrap();
    assert!(diag["error"].as_str().unwrap().contains("non-finite"));
    assert!(tmp.path().join("metrics.csv").exists());
    assert!(!tmp.path().join("summary.json").exists());
}

#[test]
fn ablation_arms_are_reproducible_from_their_echoed_configs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(EnvName::BanditChain);
    cfg.total_iterations = 8;
    let report = run_ablation(Study::Refinements, &cfg, Some(tmp.path())).unwrap();
    assert_eq!(report.arms.len(), 3);
    for arm in &report.arms {
        assert_eq!(arm.runs.len(), 2);
        for run in &arm.runs {
            let dir = tmp.path().join(&arm.name).join(format!("seed_{}", run.seed));
            let mut echoed = RunConfig::load(&dir.join("config.json")).unwrap();
            echoed.out_dir = None;
            let again = train(&echoed).unwrap();
            let returns: Vec<f64> = again.metrics().iter().map(|m| m.avg_return).collect();
            assert_eq!(returns, run.returns);
        }
    }
    for f in ["ablation.json", "ablation.csv", "curves.svg"] {
        assert!(tmp.path().join(f).exists());
    }
    let csv = fs::read_to_string(tmp.path().join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn point_robot_episode_diagnostics() {
    let mut env = EnvConfig::named(EnvName::PointRobot).build().unwrap();
    let res = run_episodes(&mut env, 2, 5, |_| {}, |_| Ok(vec![1.0, 0.0])).unwrap();
    // Driving straight at full throttle hits nothing only by luck; the
    // diagnostics must at least be populated and bounded.
    assert!(res.collision_episodes <= 2);
    assert!(res.mean_tracking_error >= 0.0 && res.mean_tracking_error < 1.0);
    assert_eq!(env.spec().obs_dim, 9);
}
