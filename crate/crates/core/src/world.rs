//! Deterministic 2D world: scripted obstacles, unicycle robot, collision
//! and path-length accounting.

use crate::geometry::{Pose2D, Shape, Vec2};
use crate::scenario::Scenario;

/// Linear and angular velocity command.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlCommand {
    pub v: f64,
    pub omega: f64,
}

impl ControlCommand {
    pub fn new(v: f64, omega: f64) -> Self {
        ControlCommand { v, omega }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub pose: Pose2D,
    pub v: f64,
    pub omega: f64,
}

impl RobotState {
    pub fn at_rest(pose: Pose2D) -> Self {
        RobotState {
            pose,
            v: 0.0,
            omega: 0.0,
        }
    }
}

/// Footprint radius and actuator limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotConfig {
    pub radius: f64,
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for RobotConfig {
    fn default() -> Self {
        RobotConfig {
            radius: 0.4,
            v_max: 1.5,
            omega_max: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Motion {
    Static,
    PiecewiseLinear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub t: f64,
    pub position: Vec2,
}

/// One obstacle: its outline and where it is over time.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleScript {
    pub shape: Shape,
    pub waypath: Vec<Knot>,
    pub motion: Motion,
}

impl ObstacleScript {
    pub fn fixed(shape: Shape, position: Vec2) -> Self {
        ObstacleScript {
            shape,
            waypath: vec![Knot { t: 0.0, position }],
            motion: Motion::Static,
        }
    }

    pub fn moving(shape: Shape, waypath: Vec<Knot>) -> Self {
        ObstacleScript {
            shape,
            waypath,
            motion: Motion::PiecewiseLinear,
        }
    }

    fn segment_at(&self, t: f64) -> Option<(Knot, Knot)> {
        if self.motion == Motion::Static || self.waypath.len() < 2 {
            return None;
        }
        let first = self.waypath[0];
        let last = self.waypath[self.waypath.len() - 1];
        if t < first.t || t >= last.t {
            return None;
        }
        // knot times are strictly increasing
        let idx = self.waypath.partition_point(|k| k.t <= t);
        Some((self.waypath[idx - 1], self.waypath[idx]))
    }

    /// Position at time `t`; the path is held at its end knots outside the
    /// scripted interval.
    pub fn position_at(&self, t: f64) -> Vec2 {
        match self.segment_at(t) {
            Some((a, b)) => {
                let s = (t - a.t) / (b.t - a.t);
                a.position + (b.position - a.position) * s
            }
            None => {
                let first = self.waypath[0];
                if self.motion == Motion::Static || t < first.t {
                    first.position
                } else {
                    self.waypath[self.waypath.len() - 1].position
                }
            }
        }
    }

    pub fn velocity_at(&self, t: f64) -> Vec2 {
        match self.segment_at(t) {
            Some((a, b)) => (b.position - a.position) / (b.t - a.t),
            None => Vec2::zeros(),
        }
    }
}

/// Ground truth for one obstacle at a world time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleTruth {
    pub id: usize,
    pub position: Vec2,
    pub velocity: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub time: f64,
    pub robot: RobotState,
    pub obstacles: Vec<ObstacleTruth>,
    pub collided: bool,
}

impl WorldState {
    /// World at `t = 0` with the robot at rest on the scenario start pose.
    pub fn initial(scenario: &Scenario) -> Self {
        let mut w = WorldState {
            time: 0.0,
            robot: RobotState::at_rest(scenario.start),
            obstacles: obstacles_at(scenario, 0.0),
            collided: false,
        };
        w.collided = clearance(&w, scenario) < 0.0;
        w
    }
}

fn obstacles_at(scenario: &Scenario, t: f64) -> Vec<ObstacleTruth> {
    scenario
        .obstacles()
        .enumerate()
        .map(|(id, o)| ObstacleTruth {
            id,
            position: o.position_at(t),
            velocity: o.velocity_at(t),
        })
        .collect()
}

/// Advances the world by one explicit Euler step of the unicycle model.
/// The command is saturated at the robot's actuator limits.
pub fn step_world(
    world: &WorldState,
    scenario: &Scenario,
    control: ControlCommand,
    dt: f64,
) -> WorldState {
    let lim = scenario.robot;
    let v = control.v.clamp(-lim.v_max, lim.v_max);
    let omega = control.omega.clamp(-lim.omega_max, lim.omega_max);
    let p = world.robot.pose;
    let (s, c) = p.theta.sin_cos();
    let pose = Pose2D::new(p.x + v * c * dt, p.y + v * s * dt, p.theta + omega * dt);
    let time = world.time + dt;
    let mut next = WorldState {
        time,
        robot: RobotState { pose, v, omega },
        obstacles: obstacles_at(scenario, time),
        collided: false,
    };
    next.collided = clearance(&next, scenario) < 0.0;
    next
}

/// Smallest gap between the robot disc and any obstacle outline; negative
/// when they overlap. `+inf` when the world has no obstacles.
pub fn clearance(world: &WorldState, scenario: &Scenario) -> f64 {
    let center = world.robot.pose.position();
    scenario
        .obstacles()
        .zip(&world.obstacles)
        .map(|(script, truth)| script.shape.signed_distance(truth.position, center) - scenario.robot.radius)
        .fold(f64::INFINITY, f64::min)
}

/// Sum of Euclidean segment lengths along a pose sequence.
pub fn path_length(trajectory: &[Pose2D]) -> f64 {
    trajectory
        .windows(2)
        .map(|w| (w[1].position() - w[0].position()).norm())
        .sum()
}
