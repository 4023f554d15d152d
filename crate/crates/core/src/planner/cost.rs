//! Receding-horizon objective and its reverse-mode gradient.
//!
//! For controls `u_0 .. u_{H-1}` rolled out through the unicycle model from
//! the current state:
//!
//! ```text
//! J = sum_{k=1..H} |s_k - s_k^ref|_Q^2
//!   + sum_{k=0..H-1} |u_k|_R^2
//!   + rho1 * sum_{k=1..H} sum_j eta_j * max(0, d_safe - dist(s_k, p_j))^2
//! ```
//!
//! The heading residual is wrapped into `(-pi, pi]`.

use crate::geometry::{normalize_angle, Pose2D};
use crate::world::{ControlCommand, RobotState};

use super::reference::ReferenceTrajectory;
use super::{point_distance_xy, ConstraintPoint, PlannerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown {
    pub tracking: f64,
    pub effort: f64,
    pub obstacle: f64,
    pub total: f64,
}

/// Unicycle rollout; returns `H + 1` states starting with the current pose.
pub fn rollout(start: Pose2D, controls: &[ControlCommand], dt: f64) -> Vec<[f64; 3]> {
    let mut s = [start.x, start.y, start.theta];
    let mut out = Vec::with_capacity(controls.len() + 1);
    out.push(s);
    for u in controls {
        let (sin, cos) = s[2].sin_cos();
        s = [s[0] + u.v * cos * dt, s[1] + u.v * sin * dt, s[2] + u.omega * dt];
        out.push(s);
    }
    out
}

pub fn cost(
    controls: &[ControlCommand],
    state: &RobotState,
    reference: &ReferenceTrajectory,
    points: &[ConstraintPoint],
    cfg: &PlannerConfig,
) -> CostBreakdown {
    evaluate(controls, state, reference, points, cfg, None)
}

/// Cost plus `dJ/du` as `[dJ/dv_k, dJ/domega_k]` per step.
pub fn cost_and_gradient(
    controls: &[ControlCommand],
    state: &RobotState,
    reference: &ReferenceTrajectory,
    points: &[ConstraintPoint],
    cfg: &PlannerConfig,
) -> (CostBreakdown, Vec<[f64; 2]>) {
    let mut grad = vec![[0.0; 2]; controls.len()];
    let c = evaluate(controls, state, reference, points, cfg, Some(&mut grad));
    (c, grad)
}

fn evaluate(
    controls: &[ControlCommand],
    state: &RobotState,
    reference: &ReferenceTrajectory,
    points: &[ConstraintPoint],
    cfg: &PlannerConfig,
    grad: Option<&mut Vec<[f64; 2]>>,
) -> CostBreakdown {
    let h = controls.len();
    assert!(
        reference.states.len() > h,
        "reference shorter than the control horizon"
    );
    let dt = cfg.dt;
    let [qx, qy, qt] = cfg.q;
    let [rv, rw] = cfg.r;
    let traj = rollout(state.pose, controls, dt);

    let mut out = CostBreakdown::default();
    // dJ/ds_k from the stage terms, k = 1..=H
    let mut stage_grad = vec![[0.0f64; 3]; h + 1];
    for k in 1..=h {
        let s = traj[k];
        let r = reference.states[k];
        let ex = s[0] - r.x;
        let ey = s[1] - r.y;
        let et = normalize_angle(s[2] - r.theta);
        out.tracking += qx * ex * ex + qy * ey * ey + qt * et * et;
        stage_grad[k] = [2.0 * qx * ex, 2.0 * qy * ey, 2.0 * qt * et];

        for p in points {
            let (d, center_dist) = point_distance_xy(s[0], s[1], p, cfg.footprint_radius);
            let gap = cfg.d_safe - d;
            if gap <= 0.0 {
                continue;
            }
            out.obstacle += cfg.rho1 * p.weight * gap * gap;
            if center_dist > 0.0 {
                // d(dist)/d(x, y) = (c - p) / |c - p|
                let f = -2.0 * cfg.rho1 * p.weight * gap / center_dist;
                stage_grad[k][0] += f * (s[0] - p.position.x);
                stage_grad[k][1] += f * (s[1] - p.position.y);
            }
        }
    }
    for u in controls {
        out.effort += rv * u.v * u.v + rw * u.omega * u.omega;
    }
    out.total = out.tracking + out.effort + out.obstacle;

    if let Some(grad) = grad {
        // adjoint of s_{k+1}, swept backwards
        let mut lam = [0.0f64; 3];
        for k in (0..h).rev() {
            let next = stage_grad[k + 1];
            lam = [lam[0] + next[0], lam[1] + next[1], lam[2] + next[2]];
            let u = controls[k];
            let th = traj[k][2];
            let (sin, cos) = th.sin_cos();
            grad[k] = [
                lam[0] * cos * dt + lam[1] * sin * dt + 2.0 * rv * u.v,
                lam[2] * dt + 2.0 * rw * u.omega,
            ];
            // propagate through d s_{k+1} / d s_k
            lam[2] += lam[0] * (-u.v * sin * dt) + lam[1] * (u.v * cos * dt);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use crate::planner::PointOrigin;
    use approx::assert_relative_eq;

    #[test]
    fn on_reference_at_rest_is_free() {
        let cfg = PlannerConfig {
            horizon: 4,
            ..Default::default()
        };
        let state = RobotState::at_rest(Pose2D::new(1.0, 2.0, 0.3));
        let reference = ReferenceTrajectory {
            states: vec![state.pose; 5],
        };
        let controls = vec![ControlCommand::default(); 4];
        let c = cost(&controls, &state, &reference, &[], &cfg);
        assert_eq!(c.total, 0.0);
    }

    #[test]
    fn obstacle_term_zero_without_points() {
        let cfg = PlannerConfig {
            horizon: 3,
            ..Default::default()
        };
        let state = RobotState::at_rest(Pose2D::new(0.0, 0.0, 0.0));
        let reference = ReferenceTrajectory {
            states: vec![Pose2D::new(1.0, 1.0, 1.0); 4],
        };
        let controls = vec![ControlCommand::new(0.7, -0.4); 3];
        let c = cost(&controls, &state, &reference, &[], &cfg);
        assert_eq!(c.obstacle, 0.0);
        assert!(c.tracking > 0.0 && c.effort > 0.0);
    }

    #[test]
    fn far_points_contribute_nothing() {
        let cfg = PlannerConfig {
            horizon: 3,
            ..Default::default()
        };
        let state = RobotState::at_rest(Pose2D::new(0.0, 0.0, 0.0));
        let reference = ReferenceTrajectory {
            states: vec![Pose2D::new(0.0, 0.0, 0.0); 4],
        };
        let controls = vec![ControlCommand::new(0.5, 0.0); 3];
        let pts = [ConstraintPoint {
            position: Vec2::new(5.0, 0.0),
            weight: 3.0,
            origin: PointOrigin::Virtual,
        }];
        let with = cost(&controls, &state, &reference, &pts, &cfg);
        let without = cost(&controls, &state, &reference, &[], &cfg);
        assert_eq!(with, without);
    }

    #[test]
    fn single_step_hand_computed() {
        let cfg = PlannerConfig {
            horizon: 1,
            dt: 0.5,
            q: [1.0, 2.0, 0.5],
            r: [0.1, 0.2],
            rho1: 3.0,
            d_safe: 0.5,
            footprint_radius: 0.4,
            ..Default::default()
        };
        let state = RobotState::at_rest(Pose2D::new(0.0, 0.0, 0.0));
        let reference = ReferenceTrajectory {
            states: vec![Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(1.0, 0.0, 0.0)],
        };
        // s_1 = (0.5, 0, 0.5)
        let controls = [ControlCommand::new(1.0, 1.0)];
        let pts = [ConstraintPoint {
            position: Vec2::new(1.0, 0.0),
            weight: 2.0,
            origin: PointOrigin::Virtual,
        }];
        let c = cost(&controls, &state, &reference, &pts, &cfg);
        assert_relative_eq!(c.tracking, 0.25 + 0.5 * 0.25, epsilon = 1e-12);
        assert_relative_eq!(c.effort, 0.1 + 0.2, epsilon = 1e-12);
        // dist = 0.5 - 0.4 = 0.1, gap = 0.4
        assert_relative_eq!(c.obstacle, 3.0 * 2.0 * 0.16, epsilon = 1e-12);
    }
}
