//! Scenario files: JSON schema, loading and validation.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose2D, Shape, Vec2};
use crate::lidar::SensorConfig;
use crate::perception::PerceptionConfig;
use crate::planner::PlannerConfig;
use crate::prediction::{GmmParams, PredictionConfig, StepSize};
use crate::world::{Knot, Motion, ObstacleScript, RobotConfig};

/// Number of global-planner waypoints a scenario must provide.
pub const WAYPOINT_COUNT: usize = 5;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}, field `{field}`: {message}")]
    Parse {
        field: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unknown canonical scenario `{0}`")]
    UnknownCanonical(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapBounds {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl MapBounds {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Goal {
    pub x: f64,
    pub y: f64,
    pub tolerance: f64,
}

impl Goal {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GmmPreset {
    Sim,
    Real,
    Custom,
}

/// Fully validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub map_bounds: MapBounds,
    pub static_obstacles: Vec<ObstacleScript>,
    pub dynamic_obstacles: Vec<ObstacleScript>,
    /// Per dynamic obstacle: half-width of the uniform shift applied to its
    /// knot times by [`Scenario::jittered`].
    pub time_jitter: Vec<f64>,
    pub start: Pose2D,
    pub goal: Goal,
    pub waypoints: [Vec2; WAYPOINT_COUNT],
    pub robot: RobotConfig,
    pub sensor: SensorConfig,
    pub dt: f64,
    pub max_steps: usize,
    pub seed: u64,
    pub planner: PlannerConfig,
    pub gmm_preset: GmmPreset,
    pub prediction: PredictionConfig,
    pub perception: PerceptionConfig,
}

impl Scenario {
    /// Static obstacles first, then dynamic ones; the index is the
    /// obstacle id.
    pub fn obstacles(&self) -> impl Iterator<Item = &ObstacleScript> {
        self.static_obstacles.iter().chain(&self.dynamic_obstacles)
    }

    /// Empty 20 m x 20 m field, start at the origin facing +x, goal 10 m
    /// ahead.
    pub fn blank() -> Self {
        let planner = PlannerConfig::default();
        Scenario {
            name: "blank".into(),
            map_bounds: MapBounds {
                x_min: -5.0,
                y_min: -10.0,
                x_max: 15.0,
                y_max: 10.0,
            },
            static_obstacles: Vec::new(),
            dynamic_obstacles: Vec::new(),
            time_jitter: Vec::new(),
            start: Pose2D::new(0.0, 0.0, 0.0),
            goal: Goal {
                x: 10.0,
                y: 0.0,
                tolerance: 0.3,
            },
            waypoints: std::array::from_fn(|i| Vec2::new(2.5 * i as f64, 0.0)),
            robot: RobotConfig::default(),
            sensor: SensorConfig::default(),
            dt: 0.1,
            max_steps: 300,
            seed: 0,
            planner,
            gmm_preset: GmmPreset::Sim,
            prediction: PredictionConfig {
                step_size: StepSize::PerPlanningStep(planner.dt),
                ..PredictionConfig::default()
            },
            perception: PerceptionConfig::default(),
        }
    }

    /// Copy with dynamic obstacle timing perturbed deterministically by
    /// `seed`. Obstacles with zero jitter are untouched.
    pub fn jittered(&self, seed: u64) -> Scenario {
        let mut out = self.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6a09_e667_f3bc_c908);
        for (script, &j) in out.dynamic_obstacles.iter_mut().zip(&self.time_jitter) {
            let shift = if j > 0.0 { rng.random_range(-j..=j) } else { 0.0 };
            for k in &mut script.waypath {
                k.t += shift;
            }
        }
        out
    }

    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let mut de = serde_json::Deserializer::from_str(text);
        let file: ScenarioFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            ScenarioError::Parse {
                field,
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        })?;
        file.into_scenario()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ScenarioFile::from_scenario(self)).expect("serializable")
    }

    /// One of the shipped scenarios: `freespace`, `crossing`,
    /// `dense-static`, `dense-dynamic`.
    pub fn canonical(name: &str) -> Result<Scenario, ScenarioError> {
        let text = match name {
            "freespace" => include_str!("../../../scenarios/freespace.json"),
            "crossing" => include_str!("../../../scenarios/crossing.json"),
            "dense-static" => include_str!("../../../scenarios/dense-static.json"),
            "dense-dynamic" => include_str!("../../../scenarios/dense-dynamic.json"),
            other => return Err(ScenarioError::UnknownCanonical(other.to_string())),
        };
        Scenario::from_json(text)
    }

    pub const CANONICAL: [&'static str; 4] = ["freespace", "crossing", "dense-static", "dense-dynamic"];
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_json(&text)
}

// ---- on-disk schema ----

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default = "default_name")]
    name: String,
    map: MapBounds,
    robot: RobotFile,
    sensor: SensorFile,
    waypoints: Vec<[f64; 2]>,
    obstacles: Vec<ObstacleFile>,
    dt: f64,
    max_steps: usize,
    seed: u64,
    #[serde(default)]
    planner: Option<PlannerConfig>,
    #[serde(default)]
    prediction: Option<PredictionFile>,
}

fn default_name() -> String {
    "unnamed".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseFile {
    x: f64,
    y: f64,
    #[serde(default)]
    theta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotFile {
    start: PoseFile,
    goal: Goal,
    #[serde(default = "default_radius")]
    radius: f64,
    #[serde(default = "default_v_max")]
    v_max: f64,
    #[serde(default = "default_omega_max")]
    omega_max: f64,
}

fn default_radius() -> f64 {
    RobotConfig::default().radius
}
fn default_v_max() -> f64 {
    RobotConfig::default().v_max
}
fn default_omega_max() -> f64 {
    RobotConfig::default().omega_max
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SensorFile {
    n_beams: usize,
    fov: f64,
    max_range: f64,
    range_noise_sigma: f64,
    z_band: [f64; 2],
    beam_z_levels: Vec<f64>,
}

impl Default for SensorFile {
    fn default() -> Self {
        let s = SensorConfig::default();
        SensorFile {
            n_beams: s.n_beams,
            fov: s.fov,
            max_range: s.max_range,
            range_noise_sigma: s.range_noise_sigma,
            z_band: [s.z_band.0, s.z_band.1],
            beam_z_levels: s.beam_z_levels,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum ShapeFile {
    Disc { radius: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum MotionFile {
    Static,
    PiecewiseLinear,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KnotFile {
    t: f64,
    x: f64,
    y: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObstacleFile {
    shape: ShapeFile,
    motion: MotionFile,
    waypath: Vec<KnotFile>,
    #[serde(default, skip_serializing_if = "is_zero")]
    time_jitter: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionFile {
    #[serde(default = "default_preset")]
    gmm_preset: GmmPreset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gmm: Option<GmmParams>,
    #[serde(default = "default_threshold")]
    speed_threshold: f64,
    #[serde(default = "default_steps")]
    n_steps: usize,
    #[serde(default = "default_samples")]
    samples_per_step: usize,
}

fn default_preset() -> GmmPreset {
    GmmPreset::Sim
}
fn default_threshold() -> f64 {
    PredictionConfig::default().speed_threshold
}
fn default_steps() -> usize {
    PredictionConfig::default().n_steps
}
fn default_samples() -> usize {
    PredictionConfig::default().samples_per_step
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        if self.waypoints.len() != WAYPOINT_COUNT {
            return Err(invalid(format!(
                "waypoints: expected {WAYPOINT_COUNT}, got {}",
                self.waypoints.len()
            )));
        }
        if !(self.dt > 0.0) {
            return Err(invalid(format!("dt: must be > 0, got {}", self.dt)));
        }
        if self.max_steps == 0 {
            return Err(invalid("max_steps: must be >= 1"));
        }
        let m = self.map;
        if !(m.x_min < m.x_max && m.y_min < m.y_max) {
            return Err(invalid("map: empty bounds"));
        }
        let start = Pose2D::new(self.robot.start.x, self.robot.start.y, self.robot.start.theta);
        if !m.contains(start.x, start.y) {
            return Err(invalid("robot.start: outside map bounds"));
        }
        let goal = self.robot.goal;
        if !m.contains(goal.x, goal.y) {
            return Err(invalid("robot.goal: outside map bounds"));
        }
        if !(goal.tolerance > 0.0) {
            return Err(invalid("robot.goal.tolerance: must be > 0"));
        }
        let robot = RobotConfig {
            radius: self.robot.radius,
            v_max: self.robot.v_max,
            omega_max: self.robot.omega_max,
        };
        if !(robot.radius > 0.0 && robot.v_max > 0.0 && robot.omega_max > 0.0) {
            return Err(invalid("robot: radius and limits must be > 0"));
        }

        let s = &self.sensor;
        if s.n_beams < 1 {
            return Err(invalid("sensor.n_beams: must be >= 1"));
        }
        if !(s.max_range > 0.0) {
            return Err(invalid("sensor.max_range: must be > 0"));
        }
        if !(s.z_band[0] < s.z_band[1]) {
            return Err(invalid("sensor.z_band: z_min must be < z_max"));
        }
        if !(s.range_noise_sigma >= 0.0) {
            return Err(invalid("sensor.range_noise_sigma: must be >= 0"));
        }
        let sensor = SensorConfig {
            n_beams: s.n_beams,
            fov: s.fov,
            max_range: s.max_range,
            range_noise_sigma: s.range_noise_sigma,
            z_band: (s.z_band[0], s.z_band[1]),
            beam_z_levels: s.beam_z_levels.clone(),
        };

        let mut static_obstacles = Vec::new();
        let mut dynamic_obstacles = Vec::new();
        let mut time_jitter = Vec::new();
        for (i, o) in self.obstacles.into_iter().enumerate() {
            let shape = match o.shape {
                ShapeFile::Disc { radius } => {
                    if !(radius > 0.0) {
                        return Err(invalid(format!("obstacles[{i}].shape: radius must be > 0")));
                    }
                    Shape::Disc { radius }
                }
                ShapeFile::Polygon { vertices } => {
                    let vs: Vec<Vec2> = vertices.iter().map(|v| Vec2::new(v[0], v[1])).collect();
                    if !Shape::is_convex_ccw(&vs) {
                        return Err(invalid(format!(
                            "obstacles[{i}].shape: polygon must be convex and counter-clockwise"
                        )));
                    }
                    Shape::Polygon { vertices: vs }
                }
            };
            if o.waypath.is_empty() {
                return Err(invalid(format!("obstacles[{i}].waypath: empty")));
            }
            if o.waypath.windows(2).any(|w| !(w[1].t > w[0].t)) {
                return Err(invalid(format!(
                    "obstacles[{i}].waypath: times must be strictly increasing"
                )));
            }
            if !(o.time_jitter >= 0.0) {
                return Err(invalid(format!("obstacles[{i}].time_jitter: must be >= 0")));
            }
            let waypath = o
                .waypath
                .iter()
                .map(|k| Knot {
                    t: k.t,
                    position: Vec2::new(k.x, k.y),
                })
                .collect();
            match o.motion {
                MotionFile::Static => static_obstacles.push(ObstacleScript {
                    shape,
                    waypath,
                    motion: Motion::Static,
                }),
                MotionFile::PiecewiseLinear => {
                    dynamic_obstacles.push(ObstacleScript {
                        shape,
                        waypath,
                        motion: Motion::PiecewiseLinear,
                    });
                    time_jitter.push(o.time_jitter);
                }
            }
        }

        let mut planner = self.planner.unwrap_or_default();
        planner.footprint_radius = robot.radius;
        planner.v_max = robot.v_max;
        planner.omega_max = robot.omega_max;
        planner.validate().map_err(invalid)?;

        let pf = self.prediction.unwrap_or(PredictionFile {
            gmm_preset: GmmPreset::Sim,
            gmm: None,
            speed_threshold: default_threshold(),
            n_steps: default_steps(),
            samples_per_step: default_samples(),
        });
        let gmm = match (pf.gmm_preset, pf.gmm) {
            (GmmPreset::Sim, _) => GmmParams::SIM,
            (GmmPreset::Real, _) => GmmParams::REAL,
            (GmmPreset::Custom, Some(g)) => g,
            (GmmPreset::Custom, None) => {
                return Err(invalid("prediction.gmm: required when gmm_preset is custom"))
            }
        };
        gmm.validate()
            .map_err(|e| invalid(format!("prediction.gmm: {e}")))?;
        if pf.n_steps < 1 || pf.samples_per_step < 1 {
            return Err(invalid("prediction: n_steps and samples_per_step must be >= 1"));
        }
        let prediction = PredictionConfig {
            gmm,
            speed_threshold: pf.speed_threshold,
            n_steps: pf.n_steps,
            samples_per_step: pf.samples_per_step,
            step_size: StepSize::PerPlanningStep(planner.dt),
            ..PredictionConfig::default()
        };

        let waypoints = std::array::from_fn(|i| Vec2::new(self.waypoints[i][0], self.waypoints[i][1]));
        Ok(Scenario {
            name: self.name,
            map_bounds: m,
            static_obstacles,
            dynamic_obstacles,
            time_jitter,
            start,
            goal,
            waypoints,
            robot,
            sensor,
            dt: self.dt,
            max_steps: self.max_steps,
            seed: self.seed,
            planner,
            gmm_preset: pf.gmm_preset,
            prediction,
            perception: PerceptionConfig::default(),
        })
    }

    fn from_scenario(s: &Scenario) -> ScenarioFile {
        let obstacle = |o: &ObstacleScript, jitter: f64| ObstacleFile {
            shape: match &o.shape {
                Shape::Disc { radius } => ShapeFile::Disc { radius: *radius },
                Shape::Polygon { vertices } => ShapeFile::Polygon {
                    vertices: vertices.iter().map(|v| [v.x, v.y]).collect(),
                },
            },
            motion: match o.motion {
                Motion::Static => MotionFile::Static,
                Motion::PiecewiseLinear => MotionFile::PiecewiseLinear,
            },
            waypath: o
                .waypath
                .iter()
                .map(|k| KnotFile {
                    t: k.t,
                    x: k.position.x,
                    y: k.position.y,
                })
                .collect(),
            time_jitter: jitter,
        };
        let mut obstacles: Vec<ObstacleFile> = s.static_obstacles.iter().map(|o| obstacle(o, 0.0)).collect();
        obstacles.extend(
            s.dynamic_obstacles
                .iter()
                .zip(&s.time_jitter)
                .map(|(o, j)| obstacle(o, *j)),
        );
        ScenarioFile {
            name: s.name.clone(),
            map: s.map_bounds,
            robot: RobotFile {
                start: PoseFile {
                    x: s.start.x,
                    y: s.start.y,
                    theta: s.start.theta,
                },
                goal: s.goal,
                radius: s.robot.radius,
                v_max: s.robot.v_max,
                omega_max: s.robot.omega_max,
            },
            sensor: SensorFile {
                n_beams: s.sensor.n_beams,
                fov: s.sensor.fov,
                max_range: s.sensor.max_range,
                range_noise_sigma: s.sensor.range_noise_sigma,
                z_band: [s.sensor.z_band.0, s.sensor.z_band.1],
                beam_z_levels: s.sensor.beam_z_levels.clone(),
            },
            waypoints: s.waypoints.iter().map(|w| [w.x, w.y]).collect(),
            obstacles,
            dt: s.dt,
            max_steps: s.max_steps,
            seed: s.seed,
            planner: Some(s.planner),
            prediction: Some(PredictionFile {
                gmm_preset: s.gmm_preset,
                gmm: (s.gmm_preset == GmmPreset::Custom).then_some(s.prediction.gmm),
                speed_threshold: s.prediction.speed_threshold,
                n_steps: s.prediction.n_steps,
                samples_per_step: s.prediction.samples_per_step,
            }),
        }
    }
}
