//! Ray-cast lidar emulation producing body-frame 3D returns.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::exec::Execution;
use crate::geometry::{Pose2D, Vec2};
use crate::scenario::Scenario;
use crate::world::WorldState;

#[derive(Debug, Clone, PartialEq)]
pub struct SensorConfig {
    pub n_beams: usize,
    /// Full angular field of view, centred on the robot heading.
    pub fov: f64,
    pub max_range: f64,
    pub range_noise_sigma: f64,
    /// Height band kept by preprocessing, `(z_min, z_max)`.
    pub z_band: (f64, f64),
    /// One ring of beams is cast at each of these heights.
    pub beam_z_levels: Vec<f64>,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            n_beams: 360,
            fov: 2.0 * PI,
            max_range: 10.0,
            range_noise_sigma: 0.01,
            z_band: (0.1, 1.0),
            beam_z_levels: vec![-0.2, 0.3, 0.7],
        }
    }
}

impl SensorConfig {
    /// Beam bearings relative to the heading. A full circle is split into
    /// `n_beams` equal sectors; a partial field of view includes both edges.
    pub fn beam_angles(&self) -> Vec<f64> {
        let n = self.n_beams;
        if self.fov >= 2.0 * PI - 1e-9 {
            (0..n).map(|i| -PI + i as f64 * 2.0 * PI / n as f64).collect()
        } else if n == 1 {
            vec![0.0]
        } else {
            (0..n)
                .map(|i| -self.fov / 2.0 + i as f64 * self.fov / (n - 1) as f64)
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LidarScan {
    pub timestamp: f64,
    /// `(x, y, z)` in the robot body frame.
    pub points: Vec<[f64; 3]>,
}

/// Casts every beam against the scenario obstacles at the world's time.
pub fn simulate_lidar<R: Rng + ?Sized>(
    world: &WorldState,
    scenario: &Scenario,
    rng: &mut R,
) -> LidarScan {
    simulate_lidar_with(world, scenario, rng, Execution::default())
}

pub fn simulate_lidar_with<R: Rng + ?Sized>(
    world: &WorldState,
    scenario: &Scenario,
    rng: &mut R,
    exec: Execution,
) -> LidarScan {
    let sensor = &scenario.sensor;
    let pose = world.robot.pose;
    let origin = pose.position();
    let scripts: Vec<_> = scenario.obstacles().collect();
    let angles = sensor.beam_angles();
    let reach = sensor.max_range + 6.0 * sensor.range_noise_sigma;

    // Obstacles are vertical prisms, so the first hit is shared by every
    // height level of a beam.
    let hits = exec.map_slice(&angles, |&a| {
        let dir = Vec2::new((pose.theta + a).cos(), (pose.theta + a).sin());
        let mut best: Option<f64> = None;
        for (script, truth) in scripts.iter().zip(&world.obstacles) {
            let to_center = truth.position - origin;
            if to_center.norm() - script.shape.bounding_radius() > reach {
                continue;
            }
            if let Some(t) = script.shape.ray_hit(truth.position, origin, dir) {
                if best.is_none_or(|b| t < b) {
                    best = Some(t);
                }
            }
        }
        best
    });

    let noise = (sensor.range_noise_sigma > 0.0)
        .then(|| Normal::new(0.0, sensor.range_noise_sigma).expect("finite sigma"));
    let mut points = Vec::new();
    for (&a, hit) in angles.iter().zip(hits) {
        let Some(range) = hit else { continue };
        for &z in &sensor.beam_z_levels {
            let r = match &noise {
                Some(n) => range + n.sample(rng),
                None => range,
            };
            if r <= 0.0 || r > sensor.max_range {
                continue;
            }
            points.push([r * a.cos(), r * a.sin(), z]);
        }
    }
    LidarScan {
        timestamp: world.time,
        points,
    }
}

/// Projects a body-frame return into the world frame (drops `z`).
pub fn body_to_world(pose: &Pose2D, p: [f64; 3]) -> Vec2 {
    pose.transform_point(Vec2::new(p[0], p[1]))
}
