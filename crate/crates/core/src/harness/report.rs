//! Run artifacts: `metrics.json`, `table.csv`, per-trial trajectory CSVs
//! and SVG overhead plots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::geometry::{Shape, Vec2};
use crate::planner::StageTimings;
use crate::world::Motion;

use super::ablation::summarize;
use super::{AblationResults, HarnessError, TrialResult, TrialStatus};

/// Per-trial entry of `metrics.json`.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub scenario: String,
    pub mode: String,
    pub planner: String,
    pub seed: u64,
    pub status: TrialStatus,
    pub path_length_m: f64,
    pub min_clearance_m: Option<f64>,
    pub steps: usize,
    pub mean_cycle_ms: Option<f64>,
    pub p95_cycle_ms: Option<f64>,
    pub trajectory_csv: String,
}

impl TrialRecord {
    fn from_trial(t: &TrialResult, timing: bool) -> Self {
        TrialRecord {
            scenario: t.scenario.clone(),
            mode: t.mode.to_string(),
            planner: t.planner.to_string(),
            seed: t.seed,
            status: t.status,
            path_length_m: t.metrics.path_length,
            min_clearance_m: t.metrics.min_clearance,
            steps: t.metrics.steps,
            mean_cycle_ms: timing.then_some(t.metrics.mean_cycle_ms),
            p95_cycle_ms: timing.then_some(t.metrics.p95_cycle_ms),
            trajectory_csv: format!("traj_{}.csv", t.id()),
        }
    }
}

impl AblationResults {
    pub fn from_trials(trials: Vec<TrialResult>) -> Self {
        let summary = summarize(&trials);
        AblationResults { trials, summary }
    }
}

/// `metrics.json` contents. Keys are sorted; with `timing` off every
/// wall-clock field is `null`, so identical inputs give identical bytes.
pub fn metrics_json(results: &AblationResults, timing: bool) -> String {
    let trials: Vec<TrialRecord> = results
        .trials
        .iter()
        .map(|t| TrialRecord::from_trial(t, timing))
        .collect();
    let mut summary = serde_json::to_value(&results.summary).expect("serializable summary");
    if !timing {
        if let Value::Array(rows) = &mut summary {
            for r in rows {
                r["mean_cycle_ms"] = Value::Null;
            }
        }
    }
    let doc = serde_json::json!({
        "trials": trials,
        "summary": summary,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
    s.push('\n');
    s
}

pub fn trajectory_csv(t: &TrialResult) -> String {
    let mut s = String::from("t,x,y,theta,v,omega,clearance\n");
    for r in &t.trajectory {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.t, r.x, r.y, r.theta, r.v, r.omega, r.clearance
        );
    }
    s
}

fn table_csv(results: &AblationResults, timing: bool) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
    let mut s = String::from(
        "scenario,mode,planner,trials,successes,success_rate,collisions,mean_path_length_m,std_path_length_m,mean_cycle_ms\n",
    );
    for r in &results.summary {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:.4},{},{},{},{}",
            r.scenario,
            r.mode,
            r.planner,
            r.trials,
            r.successes,
            r.success_rate,
            r.collisions,
            opt(r.mean_path_length_m),
            opt(r.std_path_length_m),
            if timing { format!("{:.4}", r.mean_cycle_ms) } else { String::new() },
        );
    }
    s
}

fn write(path: &Path, contents: &str) -> Result<PathBuf, HarnessError> {
    fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path.to_path_buf())
}

/// Writes every artifact into `out_dir` (created if missing) and returns
/// the written paths.
pub fn emit_report(results: &AblationResults, out_dir: &Path, timing: bool) -> Result<Vec<PathBuf>, HarnessError> {
    if results.trials.is_empty() {
        return Err(HarnessError::NoResults);
    }
    fs::create_dir_all(out_dir).map_err(|source| HarnessError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let mut written = vec![
        write(&out_dir.join("metrics.json"), &metrics_json(results, timing))?,
        write(&out_dir.join("table.csv"), &table_csv(results, timing))?,
    ];
    for t in &results.trials {
        let id = t.id();
        written.push(write(&out_dir.join(format!("traj_{id}.csv")), &trajectory_csv(t))?);
        written.push(write(&out_dir.join(format!("traj_{id}.svg")), &render_svg(t))?);
    }
    Ok(written)
}

/// `cycle,stage,microseconds` rows for every planning cycle of a trial.
pub fn write_timing_csv(timings: &[StageTimings], path: &Path) -> Result<PathBuf, HarnessError> {
    let mut s = String::from("cycle,stage,microseconds\n");
    for (i, t) in timings.iter().enumerate() {
        for (name, d) in StageTimings::STAGES.iter().zip(t.as_array()) {
            let _ = writeln!(s, "{i},{name},{}", d.as_micros());
        }
    }
    write(path, &s)
}

/// Overhead plot of the run: map, obstacles (static filled, dynamic with
/// their scripted path), waypoints and the realised trajectory.
pub fn render_svg(t: &TrialResult) -> String {
    let sc = &t.world;
    let b = sc.map_bounds;
    let scale = 40.0;
    let w = (b.x_max - b.x_min) * scale;
    let h = (b.y_max - b.y_min) * scale;
    let px = |p: Vec2| ((p.x - b.x_min) * scale, (b.y_max - p.y) * scale);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.1} {h:.1}">"#
    );
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{w:.1}" height="{h:.1}" fill="#fcfcfa" stroke="#333"/>"##);

    let end_time = t.trajectory.last().map_or(0.0, |r| r.t);
    for script in sc.obstacles() {
        let (fill, opacity) = match script.motion {
            Motion::Static => ("#777", 1.0),
            Motion::PiecewiseLinear => ("#e69f00", 0.35),
        };
        if script.motion == Motion::PiecewiseLinear {
            let pts: Vec<String> = script
                .waypath
                .iter()
                .map(|k| {
                    let (x, y) = px(k.position);
                    format!("{x:.1},{y:.1}")
                })
                .collect();
            let _ = writeln!(
                s,
                r##"<polyline points="{}" fill="none" stroke="#e69f00" stroke-dasharray="6 4"/>"##,
                pts.join(" ")
            );
        }
        let mut at = vec![(script.position_at(0.0), opacity)];
        if script.motion == Motion::PiecewiseLinear {
            at.push((script.position_at(end_time), 0.9));
        }
        for (c, op) in at {
            match &script.shape {
                Shape::Disc { radius } => {
                    let (x, y) = px(c);
                    let _ = writeln!(
                        s,
                        r#"<circle cx="{x:.1}" cy="{y:.1}" r="{:.1}" fill="{fill}" fill-opacity="{op}"/>"#,
                        radius * scale
                    );
                }
                Shape::Polygon { vertices } => {
                    let pts: Vec<String> = vertices
                        .iter()
                        .map(|v| {
                            let (x, y) = px(c + v);
                            format!("{x:.1},{y:.1}")
                        })
                        .collect();
                    let _ = writeln!(
                        s,
                        r#"<polygon points="{}" fill="{fill}" fill-opacity="{op}"/>"#,
                        pts.join(" ")
                    );
                }
            }
        }
    }

    let wps: Vec<String> = sc
        .waypoints
        .iter()
        .map(|p| {
            let (x, y) = px(*p);
            format!("{x:.1},{y:.1}")
        })
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#56b4e9" stroke-width="1.5"/>"##,
        wps.join(" ")
    );
    for p in &sc.waypoints {
        let (x, y) = px(*p);
        let _ = writeln!(s, r##"<circle cx="{x:.1}" cy="{y:.1}" r="4" fill="#0072b2"/>"##);
    }

    let traj: Vec<String> = t
        .trajectory
        .iter()
        .map(|r| {
            let (x, y) = px(Vec2::new(r.x, r.y));
            format!("{x:.1},{y:.1}")
        })
        .collect();
    let color = match t.status {
        TrialStatus::Reached => "#009e73",
        _ => "#d55e00",
    };
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2.5"/>"#,
        traj.join(" ")
    );
    let (gx, gy) = px(sc.goal.position());
    let _ = writeln!(
        s,
        r##"<circle cx="{gx:.1}" cy="{gy:.1}" r="{:.1}" fill="none" stroke="#cc79a7" stroke-width="2"/>"##,
        sc.goal.tolerance * scale
    );
    let _ = writeln!(
        s,
        r##"<text x="8" y="18" font-family="monospace" font-size="13" fill="#222">{} {} {} seed {}: {:?}, path {:.2} m</text>"##,
        t.scenario,
        t.mode,
        t.planner,
        t.seed,
        t.status,
        t.metrics.path_length
    );
    s.push_str("</svg>\n");
    s
}
