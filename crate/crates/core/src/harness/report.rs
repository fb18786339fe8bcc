use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::oracles::BiasReport;

use super::config::RunConfig;
use super::trainer::{MetricsRow, Trainer, EVAL_SEED_BASE};

pub const METRICS_HEADER: &str = "iteration,env_steps,avg_return,return_std,q_mean,sigma_mean,alpha,b1,b2,omega1,omega2,entropy_estimate,bias_estimate";

/// Commit of the source tree this binary was built from, with a `-dirty`
/// suffix for uncommitted changes.
pub fn build_id() -> String {
    format!("{}+{}", env!("CARGO_PKG_VERSION"), env!("DSACT_BUILD_REV"))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Render metrics rows as CSV. Floats use the shortest representation
/// that parses back to the same value, so identical runs give identical
/// bytes.
pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.iteration,
            r.env_steps,
            r.avg_return,
            r.return_std,
            opt(r.q_mean),
            opt(r.sigma_mean),
            r.alpha,
            r.b1,
            opt(r.b2),
            r.omega1,
            opt(r.omega2),
            opt(r.entropy_estimate),
            opt(r.bias_estimate),
        )
        .expect("writing to a String");
    }
    s
}

/// Parse a `metrics.csv` produced by [`metrics_csv`].
pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(Error::config("metrics.csv header does not match"));
    }
    let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::config(format!("bad number {s:?}"))) };
    let opt_num = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            num(s).map(Some)
        }
    };
    let int = |s: &str| -> Result<usize> { s.parse().map_err(|_| Error::config(format!("bad integer {s:?}"))) };
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 13 {
                return Err(Error::config(format!("metrics row has {} fields", f.len())));
            }
            Ok(MetricsRow {
                iteration: int(f[0])?,
                env_steps: int(f[1])?,
                avg_return: num(f[2])?,
                return_std: num(f[3])?,
                q_mean: opt_num(f[4])?,
                sigma_mean: opt_num(f[5])?,
                alpha: num(f[6])?,
                b1: num(f[7])?,
                b2: opt_num(f[8])?,
                omega1: num(f[9])?,
                omega2: opt_num(f[10])?,
                entropy_estimate: opt_num(f[11])?,
                bias_estimate: opt_num(f[12])?,
            })
        })
        .collect()
}

/// A named polyline for [`line_chart`].
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= n as f64)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = vec![];
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One chart panel as an SVG `<g>` group at `(ox, oy)`.
fn panel(out: &mut String, ox: f64, oy: f64, w: f64, h: f64, title: &str, x_label: &str, series: &[Series]) {
    let pts = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    let (ml, mr, mt, mb) = (70.0, 150.0, 30.0, 45.0);
    let pw = w - ml - mr;
    let ph = h - mt - mb;
    let sx = |x: f64| ox + ml + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| oy + mt + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let _ = writeln!(out, r#"<g font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text>"#,
        ox + ml + pw / 2.0,
        oy + 18.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{:.1}" y="{:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="#444"/>"##,
        ox + ml,
        oy + mt
    );
    for t in nice_ticks(x0, x1, 6) {
        let x = sx(t);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            oy + mt,
            oy + mt + ph,
            oy + mt + ph + 15.0,
            fmt_tick(t)
        );
    }
    for t in nice_ticks(y0, y1, 5) {
        let y = sy(t);
        let _ = writeln!(
            out,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            ox + ml,
            ox + ml + pw,
            ox + ml - 5.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        ox + ml + pw / 2.0,
        oy + h - 8.0,
        escape(x_label)
    );
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        if !path.is_empty() {
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                path.join(" ")
            );
        }
        let ly = oy + mt + 10.0 + 16.0 * k as f64;
        let lx = ox + ml + pw + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 18.0,
            lx + 22.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    let _ = writeln!(out, "</g>");
}

/// Stacked line charts, one panel per `(title, series)` entry, sharing the
/// x-axis label.
pub fn line_chart(panels: &[(&str, Vec<Series>)], x_label: &str) -> String {
    let (w, h) = (760.0, 300.0);
    let total = h * panels.len().max(1) as f64;
    let mut out =
        format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{total}" viewBox="0 0 {w} {total}">"#);
    out.push('\n');
    out.push_str(&format!("<rect width=\"{w}\" height=\"{total}\" fill=\"white\"/>\n"));
    for (i, (title, series)) in panels.iter().enumerate() {
        panel(&mut out, 0.0, i as f64 * h, w, h, title, x_label, series);
    }
    out.push_str("</svg>\n");
    out
}

/// Return curve and, if tracked, bias curve of one run.
pub fn run_curves(rows: &[MetricsRow], name: &str) -> String {
    let ret = Series {
        name: name.to_string(),
        points: rows.iter().map(|r| (r.env_steps as f64, r.avg_return)).collect(),
    };
    let mut panels = vec![("average return", vec![ret])];
    let bias: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.bias_estimate.map(|b| (r.env_steps as f64, b)))
        .collect();
    if !bias.is_empty() {
        panels.push((
            "Q bias (estimate - truth)",
            vec![Series {
                name: name.to_string(),
                points: bias,
            }],
        ));
    }
    line_chart(&panels, "environment steps")
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub config: RunConfig,
    pub build: String,
    pub env: crate::env::EnvSpec,
    pub fixture: serde_json::Value,
    pub variant: crate::variants::VariantConfig,
    pub iterations: usize,
    pub env_steps: usize,
    pub critic_updates: usize,
    pub actor_updates: usize,
    pub final_metrics: Option<MetricsRow>,
    pub bias: Option<BiasReport>,
    pub protocol: serde_json::Value,
}

pub fn summary(trainer: &Trainer) -> Summary {
    let env = trainer.cfg.env.build().expect("validated at construction");
    Summary {
        config: trainer.cfg.clone(),
        build: build_id(),
        env: trainer.spec.clone(),
        fixture: env.fixture(),
        variant: trainer.procedure().variant,
        iterations: trainer.iteration,
        env_steps: trainer.env_steps,
        critic_updates: trainer.critic_updates,
        actor_updates: trainer.actor_updates,
        final_metrics: trainer.metrics().last().cloned(),
        bias: trainer.last_bias().cloned(),
        protocol: serde_json::json!({
            "eval_seed_base": EVAL_SEED_BASE,
            "eval_policy": "deterministic tanh(mu)",
            "bias_horizon_rule": "smallest T with gamma^T < 1e-3",
            "bias_entropy_at_first_step": false,
            "bias_units": "unscaled reward",
            "bias_rollouts": trainer.cfg.bias_rollouts,
            "policy_delay_applies_to": ["actor", "temperature", "target networks"],
        }),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Final state of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub trainer: Trainer,
    pub out_dir: Option<PathBuf>,
}

impl TrainOutcome {
    pub fn metrics(&self) -> &[MetricsRow] {
        self.trainer.metrics()
    }
}

/// Train with `cfg`, writing `metrics.csv`, `summary.json`,
/// `checkpoint_<iter>.json` and `curves.svg` to `cfg.out_dir` if set.
///
/// On a numerical failure the partial metrics and a `diagnostics.json`
/// are written before the error is returned.
pub fn train(cfg: &RunConfig) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(cfg.clone())?;
    let out = cfg.out_dir.clone();
    if let Some(dir) = &out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write(&dir.join("config.json"), &cfg.to_json())?;
        trainer.checkpoint().save(&dir.join("checkpoint_0.json"))?;
    }
    let result = trainer.run_with(|t| match &out {
        Some(dir) => t
            .checkpoint()
            .save(&dir.join(format!("checkpoint_{}.json", t.iteration))),
        None => Ok(()),
    });
    // A run with no iterations leaves just the config echo and the initial
    // checkpoint.
    if let (Some(dir), true) = (&out, cfg.total_iterations > 0) {
        write(&dir.join("metrics.csv"), &metrics_csv(trainer.metrics()))?;
        if let Err(e) = &result {
            let diag = serde_json::json!({
                "error": e.to_string(),
                "iteration": trainer.iteration,
                "env_steps": trainer.env_steps,
                "critic_updates": trainer.critic_updates,
                "alpha": trainer.temperature.alpha,
                "boundary": trainer.critics.critics.iter().map(|c| c.b).collect::<Vec<_>>(),
                "omega": trainer.critics.critics.iter().map(|c| c.omega).collect::<Vec<_>>(),
                "last_metrics": trainer.metrics().last(),
            });
            write(&dir.join("diagnostics.json"), &serde_json::to_string_pretty(&diag)?)?;
        } else {
            trainer
                .checkpoint()
                .save(&dir.join(format!("checkpoint_{}.json", trainer.iteration)))?;
            write(
                &dir.join("summary.json"),
                &serde_json::to_string_pretty(&summary(&trainer))?,
            )?;
            write(
                &dir.join("curves.svg"),
                &run_curves(trainer.metrics(), cfg.algorithm_label().as_str()),
            )?;
        }
    }
    result?;
    Ok(TrainOutcome { trainer, out_dir: out })
}
