//! Closed-loop trials, ablations, reports and latency measurement.

mod ablation;
mod bench;
mod report;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::dwa::{DwaConfig, DwaPlanner};
use crate::geometry::Pose2D;
use crate::lidar::simulate_lidar;
use crate::perception::{preprocess_scan, FrameBuffer, PerceptionError};
use crate::planner::{CycleReport, PipelineMode, Planner, PlannerError, StageTimings};
use crate::prediction::OffsetModel;
use crate::scenario::Scenario;
use crate::world::{clearance, path_length, step_world, ControlCommand, WorldState};

pub use ablation::{run_ablation, run_ablation_with, AblationResults, SummaryRow};
pub use bench::{bench_latency, perception_scaling, LatencySummary, StageStats};
pub use report::{emit_report, metrics_json, render_svg, trajectory_csv, write_timing_csv, TrialRecord};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no results to report")]
    NoResults,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("ablation needs at least {need} {what}, got {got}")]
    TooFew {
        what: &'static str,
        need: usize,
        got: usize,
    },
    #[error("latency bench needs at least 100 cycles, got {0}")]
    TooFewCycles(usize),
    #[error("unknown {what} `{value}`")]
    Unknown { what: &'static str, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionMode {
    NoPrediction,
    ConstantVelocity,
    Gmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameMode {
    SingleFrame,
    MultiFrame,
}

/// One cell of the ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AblationMode {
    pub prediction: PredictionMode,
    pub frames: FrameMode,
}

impl AblationMode {
    pub const fn new(prediction: PredictionMode, frames: FrameMode) -> Self {
        AblationMode { prediction, frames }
    }

    pub const GMM_MULTI: AblationMode = AblationMode::new(PredictionMode::Gmm, FrameMode::MultiFrame);

    pub fn pipeline(self) -> PipelineMode {
        PipelineMode {
            tracking: self.frames == FrameMode::MultiFrame,
            prediction: match self.prediction {
                PredictionMode::NoPrediction => None,
                PredictionMode::ConstantVelocity => Some(OffsetModel::Zero),
                PredictionMode::Gmm => Some(OffsetModel::Gmm),
            },
        }
    }
}

impl Default for AblationMode {
    fn default() -> Self {
        AblationMode::GMM_MULTI
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.prediction {
            PredictionMode::NoPrediction => "no_prediction",
            PredictionMode::ConstantVelocity => "constant_velocity",
            PredictionMode::Gmm => "gmm",
        };
        let fr = match self.frames {
            FrameMode::SingleFrame => "single_frame",
            FrameMode::MultiFrame => "multi_frame",
        };
        write!(f, "{p}:{fr}")
    }
}

impl FromStr for AblationMode {
    type Err = HarnessError;

    /// `<prediction>[:<frames>]`; frames default to `multi_frame`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (p, fr) = s.split_once(':').unwrap_or((s, "multi_frame"));
        let prediction = match p {
            "no_prediction" => PredictionMode::NoPrediction,
            "constant_velocity" => PredictionMode::ConstantVelocity,
            "gmm" => PredictionMode::Gmm,
            _ => {
                return Err(HarnessError::Unknown {
                    what: "prediction mode",
                    value: p.to_string(),
                })
            }
        };
        let frames = match fr {
            "single_frame" => FrameMode::SingleFrame,
            "multi_frame" => FrameMode::MultiFrame,
            _ => {
                return Err(HarnessError::Unknown {
                    what: "frame mode",
                    value: fr.to_string(),
                })
            }
        };
        Ok(AblationMode { prediction, frames })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    #[default]
    Mfneupan,
    Dwa,
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlannerKind::Mfneupan => "mfneupan",
            PlannerKind::Dwa => "dwa",
        })
    }
}

impl FromStr for PlannerKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mfneupan" => Ok(PlannerKind::Mfneupan),
            "dwa" => Ok(PlannerKind::Dwa),
            _ => Err(HarnessError::Unknown {
                what: "planner",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Reached,
    Collided,
    Timeout,
    SolverError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub path_length: f64,
    pub reached: bool,
    pub collided: bool,
    pub steps: usize,
    /// `None` when no obstacle was ever present.
    pub min_clearance: Option<f64>,
    pub mean_cycle_ms: f64,
    pub p95_cycle_ms: f64,
    pub seed: u64,
}

/// One row of the trajectory dump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
    pub clearance: f64,
}

impl TrajectoryRow {
    pub fn pose(&self) -> Pose2D {
        Pose2D {
            x: self.x,
            y: self.y,
            theta: self.theta,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub scenario: String,
    pub mode: AblationMode,
    pub planner: PlannerKind,
    pub seed: u64,
    pub status: TrialStatus,
    pub metrics: RunMetrics,
    pub trajectory: Vec<TrajectoryRow>,
    pub cycle_timings: Vec<StageTimings>,
    /// The timing-jittered scenario the trial actually ran.
    pub world: Scenario,
    pub error: Option<String>,
}

impl TrialResult {
    /// File-name stem shared by this trial's artifacts.
    pub fn id(&self) -> String {
        format!(
            "{}_{}_{}_s{}",
            self.scenario,
            self.mode.to_string().replace(':', "-"),
            self.planner,
            self.seed
        )
    }
}

/// What a closed-loop controller needs per cycle.
pub(crate) enum ActivePlanner {
    Mpc(Box<Planner>),
    Dwa(DwaPlanner),
}

impl ActivePlanner {
    pub(crate) fn new(scenario: &Scenario, mode: AblationMode, kind: PlannerKind) -> Self {
        match kind {
            PlannerKind::Mfneupan => ActivePlanner::Mpc(Box::new(Planner::new(
                scenario.planner,
                scenario.prediction,
                scenario.perception.clone(),
                mode.pipeline(),
            ))),
            PlannerKind::Dwa => ActivePlanner::Dwa(DwaPlanner {
                config: DwaConfig::default(),
                v_max: scenario.planner.v_ref.min(scenario.robot.v_max),
                omega_max: scenario.robot.omega_max,
                radius: scenario.robot.radius,
                dt: scenario.dt,
            }),
        }
    }

    pub(crate) fn cycle(
        &mut self,
        world: &WorldState,
        scenario: &Scenario,
        buffer: &FrameBuffer,
        rng: &mut ChaCha8Rng,
    ) -> Result<(ControlCommand, CycleReport), PlannerError> {
        match self {
            ActivePlanner::Mpc(p) => p.plan_cycle(&world.robot, &scenario.waypoints, buffer, rng),
            ActivePlanner::Dwa(d) => Ok(d.plan_cycle(&world.robot, &scenario.waypoints, buffer)),
        }
    }
}

/// Independent generator streams for sensor noise and planner sampling.
pub(crate) fn trial_rngs(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut sensor = ChaCha8Rng::seed_from_u64(seed);
    sensor.set_stream(1);
    let mut planner = ChaCha8Rng::seed_from_u64(seed);
    planner.set_stream(2);
    (sensor, planner)
}

/// Scans the world and pushes the preprocessed, odometry-frame cloud.
pub(crate) fn sense(
    world: &WorldState,
    scenario: &Scenario,
    buffer: &mut FrameBuffer,
    rng: &mut ChaCha8Rng,
) -> Result<(), PerceptionError> {
    let scan = simulate_lidar(world, scenario, rng);
    let cloud = preprocess_scan(&scan, scenario.sensor.z_band, scenario.perception.downsample_cell)
        .to_parent_frame(&world.robot.pose);
    buffer.push(cloud)
}

fn row(world: &WorldState, gap: f64) -> TrajectoryRow {
    let p = world.robot.pose;
    TrajectoryRow {
        t: world.time,
        x: p.x,
        y: p.y,
        theta: p.theta,
        v: world.robot.v,
        omega: world.robot.omega,
        clearance: gap,
    }
}

fn reached(world: &WorldState, scenario: &Scenario) -> bool {
    (world.robot.pose.position() - scenario.goal.position()).norm() <= scenario.goal.tolerance
}

pub(crate) fn percentile(sorted_ms: &[f64], q: f64) -> f64 {
    if sorted_ms.is_empty() {
        return 0.0;
    }
    let idx = ((sorted_ms.len() as f64 - 1.0) * q).round() as usize;
    sorted_ms[idx.min(sorted_ms.len() - 1)]
}

pub(crate) fn millis(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Closed loop of sense, plan and step until the goal tolerance is met,
/// the robot collides, the step budget runs out, or the solver aborts.
pub fn run_trial(scenario: &Scenario, mode: AblationMode, seed: u64, kind: PlannerKind) -> TrialResult {
    let sc = scenario.jittered(seed);
    let (mut sensor_rng, mut planner_rng) = trial_rngs(seed);
    let mut planner = ActivePlanner::new(&sc, mode, kind);
    let mut buffer = FrameBuffer::new();
    let mut world = WorldState::initial(&sc);

    let gap = clearance(&world, &sc);
    let mut trajectory = vec![row(&world, gap)];
    let mut min_gap = gap;
    let mut timings = Vec::new();
    let mut error = None;
    let mut status = if world.collided {
        Some(TrialStatus::Collided)
    } else {
        None
    };

    let mut steps = 0;
    while status.is_none() && steps < sc.max_steps {
        if reached(&world, &sc) {
            status = Some(TrialStatus::Reached);
            break;
        }
        let cycle = sense(&world, &sc, &mut buffer, &mut sensor_rng)
            .map_err(PlannerError::from)
            .and_then(|_| planner.cycle(&world, &sc, &buffer, &mut planner_rng));
        let command = match cycle {
            Ok((command, report)) => {
                timings.push(report.timings);
                command
            }
            Err(e) => {
                error = Some(e.to_string());
                status = Some(TrialStatus::SolverError);
                break;
            }
        };
        world = step_world(&world, &sc, command, sc.dt);
        steps += 1;
        let gap = clearance(&world, &sc);
        min_gap = min_gap.min(gap);
        trajectory.push(row(&world, gap));
        if world.collided {
            status = Some(TrialStatus::Collided);
        }
    }
    let status = status.unwrap_or(if reached(&world, &sc) {
        TrialStatus::Reached
    } else {
        TrialStatus::Timeout
    });

    let poses: Vec<Pose2D> = trajectory.iter().map(TrajectoryRow::pose).collect();
    let mut cycle_ms: Vec<f64> = timings.iter().map(|t| millis(t.total)).collect();
    let mean_cycle_ms = if cycle_ms.is_empty() {
        0.0
    } else {
        cycle_ms.iter().sum::<f64>() / cycle_ms.len() as f64
    };
    cycle_ms.sort_by(f64::total_cmp);
    let metrics = RunMetrics {
        path_length: path_length(&poses),
        reached: status == TrialStatus::Reached,
        collided: status == TrialStatus::Collided,
        steps,
        min_clearance: min_gap.is_finite().then_some(min_gap),
        mean_cycle_ms,
        p95_cycle_ms: percentile(&cycle_ms, 0.95),
        seed,
    };
    TrialResult {
        scenario: scenario.name.clone(),
        mode,
        planner: kind,
        seed,
        status,
        metrics,
        trajectory,
        cycle_timings: timings,
        world: sc,
        error,
    }
}
