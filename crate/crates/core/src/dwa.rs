//! Dynamic-window baseline: samples admissible `(v, omega)` pairs, rolls
//! each out at constant command and scores goal progress, speed and
//! clearance against the newest scan.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::geometry::{Pose2D, Vec2};
use crate::perception::FrameBuffer;
use crate::planner::{build_reference, CycleReport, StageTimings};
use crate::world::{ControlCommand, RobotState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DwaConfig {
    pub v_samples: usize,
    pub omega_samples: usize,
    pub max_accel: f64,
    pub max_angular_accel: f64,
    pub predict_time: f64,
    /// Distance along the waypoint path of the steering target.
    pub lookahead: f64,
    pub goal_gain: f64,
    pub speed_gain: f64,
    pub obstacle_gain: f64,
}

impl Default for DwaConfig {
    fn default() -> Self {
        DwaConfig {
            v_samples: 11,
            omega_samples: 21,
            max_accel: 2.0,
            max_angular_accel: 4.0,
            predict_time: 2.0,
            lookahead: 2.0,
            goal_gain: 1.0,
            speed_gain: 0.3,
            obstacle_gain: 0.4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DwaPlanner {
    pub config: DwaConfig,
    pub v_max: f64,
    pub omega_max: f64,
    pub radius: f64,
    pub dt: f64,
}

impl DwaPlanner {
    pub fn plan_cycle(
        &mut self,
        state: &RobotState,
        waypoints: &[Vec2],
        buffer: &FrameBuffer,
    ) -> (ControlCommand, CycleReport) {
        let started = Instant::now();
        let cfg = self.config;
        let steps_ahead = (cfg.lookahead / (self.v_max * self.dt)).ceil().max(1.0) as usize;
        let target = *build_reference(waypoints, state.pose.position(), self.v_max, self.dt, steps_ahead)
            .states
            .last()
            .expect("non-empty reference");
        let pts: &[Vec2] = buffer.newest().map(|c| c.points.as_slice()).unwrap_or(&[]);

        let v_lo = (state.v - cfg.max_accel * self.dt).max(0.0);
        let v_hi = (state.v + cfg.max_accel * self.dt).min(self.v_max);
        let w_lo = (state.omega - cfg.max_angular_accel * self.dt).max(-self.omega_max);
        let w_hi = (state.omega + cfg.max_angular_accel * self.dt).min(self.omega_max);
        let lerp = |lo: f64, hi: f64, i: usize, n: usize| {
            if n <= 1 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        };
        let n_roll = (cfg.predict_time / self.dt).round().max(1.0) as usize;

        let mut best: Option<(f64, ControlCommand)> = None;
        for i in 0..cfg.v_samples {
            let v = lerp(v_lo, v_hi, i, cfg.v_samples);
            for j in 0..cfg.omega_samples {
                let w = lerp(w_lo, w_hi, j, cfg.omega_samples);
                let mut pose = state.pose;
                let mut min_gap = f64::INFINITY;
                for _ in 0..n_roll {
                    let (s, c) = pose.theta.sin_cos();
                    pose = Pose2D::new(pose.x + v * c * self.dt, pose.y + v * s * self.dt, pose.theta + w * self.dt);
                    for p in pts {
                        min_gap = min_gap.min((p - pose.position()).norm() - self.radius);
                    }
                }
                if min_gap <= 0.05 {
                    continue;
                }
                let score = cfg.goal_gain * (pose.position() - target.position()).norm()
                    + cfg.speed_gain * (self.v_max - v)
                    + cfg.obstacle_gain / min_gap.min(5.0);
                if best.is_none_or(|(b, _)| score < b) {
                    best = Some((score, ControlCommand::new(v, w)));
                }
            }
        }
        // Everything blocked: brake and turn in place.
        let command = best
            .map(|(_, c)| c)
            .unwrap_or(ControlCommand::new(0.0, self.omega_max * 0.5));
        let total = started.elapsed();
        (
            command,
            CycleReport {
                timings: StageTimings {
                    solve: total,
                    total,
                    ..Default::default()
                },
                n_tracks: 0,
                n_virtual: 0,
                n_constraints: pts.len(),
                raw: command,
                solve: None,
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::PointCloud2D;

    fn planner() -> DwaPlanner {
        DwaPlanner {
            config: DwaConfig::default(),
            v_max: 1.0,
            omega_max: 1.5,
            radius: 0.4,
            dt: 0.1,
        }
    }

    fn line() -> Vec<Vec2> {
        (0..5).map(|i| Vec2::new(2.5 * i as f64, 0.0)).collect()
    }

    #[test]
    fn free_space_drives_forward() {
        let state = RobotState {
            pose: Pose2D::new(0.0, 0.0, 0.0),
            v: 0.5,
            omega: 0.0,
        };
        let (cmd, _) = planner().plan_cycle(&state, &line(), &FrameBuffer::new());
        assert!(cmd.v > 0.5);
        assert!(cmd.omega.abs() < 0.2);
    }

    #[test]
    fn blocked_ahead_turns_away() {
        let state = RobotState {
            pose: Pose2D::new(0.0, 0.0, 0.0),
            v: 0.5,
            omega: 0.0,
        };
        let mut buf = FrameBuffer::new();
        let wall = (0..20).map(|i| Vec2::new(1.2, -1.0 + 0.1 * i as f64)).collect();
        buf.push(PointCloud2D::new(wall, 0.0)).unwrap();
        let (cmd, _) = planner().plan_cycle(&state, &line(), &buf);
        assert!(cmd.omega.abs() > 0.1 || cmd.v < 0.5);
    }
}
