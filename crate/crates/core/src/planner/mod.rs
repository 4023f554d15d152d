//! Point-constrained receding-horizon local planner.
//!
//! One planning cycle runs perception on the frame buffer, scatters virtual
//! points ahead of moving tracks, builds a reference from the waypoints,
//! keeps the `max_points` constraint points nearest the robot, solves for a
//! control sequence and post-processes its first element.
//!
//! State, reference and constraint points share one frame (the odometry
//! frame in closed loop); every quantity the objective uses is invariant
//! under a common rigid transform.

mod cost;
mod reference;
mod solver;

use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::perception::{perceive, FrameBuffer, PerceptionConfig, PerceptionError, PointCloud2D, Tracker};
use crate::prediction::{predict, OffsetModel, PredictionConfig, VirtualPoint};
use crate::world::{ControlCommand, RobotState};

pub use cost::{cost, cost_and_gradient, rollout, CostBreakdown};
pub use reference::{build_reference, ReferenceTrajectory};
pub use solver::{solve_mpc, SolveReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("solver aborted: non-finite cost at iterate {iterate:?}")]
    NonFiniteCost { iterate: Vec<ControlCommand> },
    #[error("warm start has {got} steps, horizon is {expected}")]
    WarmStartLength { expected: usize, got: usize },
    #[error(transparent)]
    Perception(#[from] PerceptionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlPostConfig {
    /// Low-pass factor on linear velocity, `0 <= beta < 1`.
    pub beta: f64,
    pub omega_clip: f64,
}

impl Default for ControlPostConfig {
    fn default() -> Self {
        ControlPostConfig {
            beta: 0.5,
            omega_clip: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub horizon: usize,
    pub dt: f64,
    /// Tracking weights on `(x, y, theta)`.
    pub q: [f64; 3],
    /// Effort weights on `(v, omega)`.
    pub r: [f64; 2],
    pub rho1: f64,
    pub d_safe: f64,
    /// Velocity-weight gain: `eta = 1 + kappa * source speed`.
    pub kappa: f64,
    pub max_points: usize,
    pub v_ref: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub footprint_radius: f64,
    pub iterations: usize,
    pub initial_step: f64,
    pub max_step: f64,
    pub armijo_c: f64,
    pub backtrack_shrink: f64,
    pub max_backtracks: usize,
    pub post: ControlPostConfig,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            horizon: 20,
            dt: 0.1,
            q: [1.0, 1.0, 0.2],
            r: [0.1, 0.05],
            rho1: 10.0,
            d_safe: 0.5,
            kappa: 1.0,
            max_points: 100,
            v_ref: 1.0,
            v_max: 1.5,
            omega_max: 1.5,
            footprint_radius: 0.4,
            iterations: 50,
            initial_step: 0.1,
            max_step: 10.0,
            armijo_c: 1e-4,
            backtrack_shrink: 0.5,
            max_backtracks: 40,
            post: ControlPostConfig::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), String> {
        let checks = [
            (self.horizon >= 1, "horizon must be >= 1"),
            (self.dt > 0.0, "dt must be > 0"),
            (self.rho1 >= 0.0, "rho1 must be >= 0"),
            (self.d_safe > 0.0, "d_safe must be > 0"),
            (self.max_points >= 1, "max_points must be >= 1"),
            (self.v_max > 0.0 && self.omega_max > 0.0, "bounds must be > 0"),
            (
                (0.0..1.0).contains(&self.post.beta),
                "post.beta must be in [0, 1)",
            ),
            (self.post.omega_clip > 0.0, "post.omega_clip must be > 0"),
            (
                self.q.iter().chain(&self.r).all(|w| *w >= 0.0),
                "weights must be >= 0",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(format!("planner: {msg}")),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointOrigin {
    CurrentScan,
    Virtual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintPoint {
    pub position: Vec2,
    /// Velocity weight, `>= 1`.
    pub weight: f64,
    pub origin: PointOrigin,
}

/// Signed gap between a point and the disc footprint at `(x, y)`, plus the
/// raw centre distance.
pub(crate) fn point_distance_xy(x: f64, y: f64, p: &ConstraintPoint, radius: f64) -> (f64, f64) {
    let c = ((p.position.x - x).powi(2) + (p.position.y - y).powi(2)).sqrt();
    (c - radius, c)
}

/// Distance from `p` to the footprint boundary; negative inside.
pub fn point_distance(state: &RobotState, p: &ConstraintPoint, footprint_radius: f64) -> f64 {
    point_distance_xy(state.pose.x, state.pose.y, p, footprint_radius).0
}

/// Merges scan points (weight 1) with virtual points (weight
/// `1 + kappa * speed`) and keeps the `max_points` closest to `origin`,
/// ordered by `(distance, x, y)`.
pub fn select_points(
    origin: Vec2,
    scan: &PointCloud2D,
    virtual_points: &[VirtualPoint],
    cfg: &PlannerConfig,
) -> Vec<ConstraintPoint> {
    let mut all: Vec<(f64, ConstraintPoint)> = scan
        .points
        .iter()
        .map(|p| ConstraintPoint {
            position: *p,
            weight: 1.0,
            origin: PointOrigin::CurrentScan,
        })
        .chain(virtual_points.iter().map(|v| ConstraintPoint {
            position: v.position,
            weight: 1.0 + cfg.kappa * v.source_speed,
            origin: PointOrigin::Virtual,
        }))
        .map(|c| ((c.position - origin).norm(), c))
        .collect();
    let order = |a: &(f64, ConstraintPoint), b: &(f64, ConstraintPoint)| {
        a.0.total_cmp(&b.0)
            .then(a.1.position.x.total_cmp(&b.1.position.x))
            .then(a.1.position.y.total_cmp(&b.1.position.y))
    };
    if all.len() > cfg.max_points {
        all.select_nth_unstable_by(cfg.max_points - 1, order);
        all.truncate(cfg.max_points);
    }
    all.sort_by(order);
    all.into_iter().map(|(_, c)| c).collect()
}

/// Low-pass filters the linear velocity and clips the angular rate.
pub fn postprocess(
    v_star: f64,
    omega_star: f64,
    prev_v_out: f64,
    cfg: &ControlPostConfig,
) -> ControlCommand {
    ControlCommand::new(
        cfg.beta * prev_v_out + (1.0 - cfg.beta) * v_star,
        omega_star.clamp(-cfg.omega_clip, cfg.omega_clip),
    )
}

/// Which parts of the multi-frame pipeline are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineMode {
    /// Track obstacles across buffered frames. Without it every obstacle is
    /// treated as static.
    pub tracking: bool,
    /// Offset model for virtual points; `None` disables prediction.
    pub prediction: Option<OffsetModel>,
}

impl Default for PipelineMode {
    fn default() -> Self {
        PipelineMode {
            tracking: true,
            prediction: Some(OffsetModel::Gmm),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageTimings {
    pub perception: Duration,
    pub prediction: Duration,
    pub reference: Duration,
    pub selection: Duration,
    pub solve: Duration,
    pub postprocess: Duration,
    pub total: Duration,
}

impl StageTimings {
    pub const STAGES: [&'static str; 7] = [
        "perception",
        "prediction",
        "reference",
        "selection",
        "solve",
        "postprocess",
        "total",
    ];

    pub fn as_array(&self) -> [Duration; 7] {
        [
            self.perception,
            self.prediction,
            self.reference,
            self.selection,
            self.solve,
            self.postprocess,
            self.total,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    pub timings: StageTimings,
    pub n_tracks: usize,
    pub n_virtual: usize,
    pub n_constraints: usize,
    /// Raw optimiser output before post-processing.
    pub raw: ControlCommand,
    pub solve: Option<SolveReport>,
}

/// A stateful planner instance: tracker, warm start and filter memory.
#[derive(Debug, Clone)]
pub struct Planner {
    pub config: PlannerConfig,
    pub prediction: PredictionConfig,
    pub mode: PipelineMode,
    tracker: Tracker,
    warm: Option<Vec<ControlCommand>>,
    prev_v_out: f64,
}

impl Planner {
    pub fn new(
        config: PlannerConfig,
        prediction: PredictionConfig,
        perception: PerceptionConfig,
        mode: PipelineMode,
    ) -> Self {
        Planner {
            config,
            prediction,
            mode,
            tracker: Tracker::new(perception),
            warm: None,
            prev_v_out: 0.0,
        }
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    pub fn reset(&mut self) {
        self.tracker.reset();
        self.warm = None;
        self.prev_v_out = 0.0;
    }

    /// perceive, predict, reference, select, solve, post-process.
    pub fn plan_cycle<R: Rng + ?Sized>(
        &mut self,
        state: &RobotState,
        waypoints: &[Vec2],
        buffer: &FrameBuffer,
        rng: &mut R,
    ) -> Result<(ControlCommand, CycleReport), PlannerError> {
        let cfg = self.config;
        let t_start = Instant::now();
        let mut timings = StageTimings::default();

        let mark = Instant::now();
        let tracks = if self.mode.tracking && !buffer.is_empty() {
            perceive(buffer, &mut self.tracker)?
        } else {
            Vec::new()
        };
        timings.perception = mark.elapsed();

        let mark = Instant::now();
        let virtual_points = match self.mode.prediction {
            Some(offsets) => {
                let pc = PredictionConfig {
                    offsets,
                    ..self.prediction
                };
                predict(&tracks, &pc, rng)
            }
            None => Vec::new(),
        };
        timings.prediction = mark.elapsed();

        let mark = Instant::now();
        let reference = build_reference(waypoints, state.pose.position(), cfg.v_ref, cfg.dt, cfg.horizon);
        timings.reference = mark.elapsed();

        let mark = Instant::now();
        let empty = PointCloud2D::default();
        let scan = buffer.newest().unwrap_or(&empty);
        let points = select_points(state.pose.position(), scan, &virtual_points, &cfg);
        timings.selection = mark.elapsed();

        let mark = Instant::now();
        let (solution, report) = solve_mpc(state, &reference, &points, &cfg, self.warm.as_deref())?;
        timings.solve = mark.elapsed();

        let mark = Instant::now();
        let raw = solution[0];
        let command = postprocess(raw.v, raw.omega, self.prev_v_out, &cfg.post);
        self.prev_v_out = command.v;
        let mut shifted = solution[1..].to_vec();
        shifted.push(*solution.last().expect("horizon >= 1"));
        self.warm = Some(shifted);
        timings.postprocess = mark.elapsed();
        timings.total = t_start.elapsed();

        Ok((
            command,
            CycleReport {
                timings,
                n_tracks: tracks.len(),
                n_virtual: virtual_points.len(),
                n_constraints: points.len(),
                raw,
                solve: Some(report),
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose2D;
    use approx::assert_relative_eq;

    fn scan_point(x: f64, y: f64) -> ConstraintPoint {
        ConstraintPoint {
            position: Vec2::new(x, y),
            weight: 1.0,
            origin: PointOrigin::CurrentScan,
        }
    }

    #[test]
    fn distance_sign_convention() {
        let s = RobotState::at_rest(Pose2D::new(0.0, 0.0, 0.0));
        assert_relative_eq!(point_distance(&s, &scan_point(1.0, 0.0), 0.4), 0.6, epsilon = 1e-12);
        assert_relative_eq!(point_distance(&s, &scan_point(0.0, 0.0), 0.4), -0.4);
        assert_eq!(point_distance(&s, &scan_point(0.0, 0.4), 0.4), 0.0);
    }

    #[test]
    fn postprocess_examples() {
        let post = ControlPostConfig {
            beta: 0.5,
            omega_clip: 1.0,
        };
        assert_eq!(postprocess(1.0, 0.0, 0.0, &post).v, 0.5);
        assert_eq!(postprocess(0.0, 2.0, 0.0, &post).omega, 1.0);
        assert_eq!(postprocess(0.0, -2.0, 0.0, &post).omega, -1.0);
        let pass = ControlPostConfig { beta: 0.0, ..post };
        assert_eq!(postprocess(0.8, 0.0, 0.3, &pass).v, 0.8);
    }

    #[test]
    fn virtual_weight_from_speed() {
        let v = VirtualPoint {
            position: Vec2::new(1.0, 1.0),
            track_id: 0,
            step: 1,
            source_speed: 1.0,
        };
        let cfg = PlannerConfig {
            kappa: 1.0,
            ..Default::default()
        };
        let pts = select_points(Vec2::zeros(), &PointCloud2D::default(), &[v], &cfg);
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].weight, 2.0);
        assert_eq!(pts[0].origin, PointOrigin::Virtual);
    }

    #[test]
    fn no_points_no_constraints() {
        let pts = select_points(Vec2::zeros(), &PointCloud2D::default(), &[], &PlannerConfig::default());
        assert!(pts.is_empty());
    }

    #[test]
    fn default_config_is_valid() {
        PlannerConfig::default().validate().unwrap();
        let bad = PlannerConfig {
            d_safe: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().unwrap_err().contains("d_safe"));
    }
}
