//! Obstacle trajectory prediction as scattered virtual points.
//!
//! A tracked obstacle faster than the speed threshold is extrapolated along
//! its smoothed velocity direction `d` for `n_steps` steps. Step `j` places
//! `samples_per_step` points at `p + d*j*ds + perp(d)*o`, where the lateral
//! offset `o` is drawn from a three-component 1D Gaussian mixture.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::perception::TrackedObstacle;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GmmError {
    #[error("mixture weights must be non-negative and sum to 1, got sum {0}")]
    Weights(f64),
    #[error("component variances must be positive and finite")]
    Variance,
    #[error("component means must be finite")]
    Mean,
}

/// Three-component 1D Gaussian mixture over the lateral offset, m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmParams {
    pub means: [f64; 3],
    /// Component variances, m^2.
    pub variances: [f64; 3],
    pub weights: [f64; 3],
}

impl GmmParams {
    /// Tuning used in simulation.
    pub const SIM: GmmParams = GmmParams {
        means: [0.0, 0.1, -0.1],
        variances: [0.002, 0.002, 0.002],
        weights: [0.4, 0.3, 0.3],
    };

    /// Tuning used on the physical robot.
    pub const REAL: GmmParams = GmmParams {
        means: [0.0, 0.05, 0.1],
        variances: [0.01, 0.01, 0.01],
        weights: [0.3, 0.5, 0.2],
    };

    pub fn validate(&self) -> Result<(), GmmError> {
        let sum: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(GmmError::Weights(sum));
        }
        if self.variances.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(GmmError::Variance);
        }
        if self.means.iter().any(|m| !m.is_finite()) {
            return Err(GmmError::Mean);
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(w, m)| w * m).sum()
    }

    pub fn variance(&self) -> f64 {
        let second: f64 = (0..3)
            .map(|k| self.weights[k] * (self.variances[k] + self.means[k] * self.means[k]))
            .sum();
        second - self.mean().powi(2)
    }
}

/// Draws one offset: component `k ~ Categorical(weights)`, then
/// `o ~ N(means[k], variances[k])`.
pub fn sample_gmm<R: Rng + ?Sized>(params: &GmmParams, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut k = 2;
    for (i, w) in params.weights.iter().enumerate() {
        acc += w;
        if u < acc {
            k = i;
            break;
        }
    }
    let z: f64 = StandardNormal.sample(rng);
    params.means[k] + params.variances[k].sqrt() * z
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetModel {
    /// Offsets drawn from the mixture.
    Gmm,
    /// Every offset is zero: points sit on the extrapolated centre line.
    Zero,
}

/// Spacing between consecutive predicted steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSize {
    Fixed(f64),
    /// `ds = speed * dt`: step `j` is the obstacle's position `j` planner
    /// steps ahead.
    PerPlanningStep(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionConfig {
    pub gmm: GmmParams,
    pub offsets: OffsetModel,
    /// Tracks must move strictly faster than this, m/s.
    pub speed_threshold: f64,
    pub n_steps: usize,
    pub step_size: StepSize,
    pub samples_per_step: usize,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        PredictionConfig {
            gmm: GmmParams::SIM,
            offsets: OffsetModel::Gmm,
            speed_threshold: 0.3,
            n_steps: 20,
            step_size: StepSize::PerPlanningStep(0.1),
            samples_per_step: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualPoint {
    pub position: Vec2,
    pub track_id: u64,
    /// 1-based prediction step.
    pub step: usize,
    pub source_speed: f64,
}

/// Scatters virtual points ahead of one track with offsets supplied by
/// `offset`. Empty when the smoothed speed does not exceed the threshold.
pub fn scatter_points_with<F: FnMut() -> f64>(
    track: &TrackedObstacle,
    cfg: &PredictionConfig,
    mut offset: F,
) -> Vec<VirtualPoint> {
    let v = track.smoothed_velocity;
    let speed = v.norm();
    if !(speed > cfg.speed_threshold) {
        return Vec::new();
    }
    let d = v / speed;
    let perp = Vec2::new(-d.y, d.x);
    let ds = match cfg.step_size {
        StepSize::Fixed(ds) => ds,
        StepSize::PerPlanningStep(dt) => speed * dt,
    };
    let origin = track.position();
    let mut out = Vec::with_capacity(cfg.n_steps * cfg.samples_per_step);
    for j in 1..=cfg.n_steps {
        let ahead = origin + d * (j as f64 * ds);
        for _ in 0..cfg.samples_per_step {
            out.push(VirtualPoint {
                position: ahead + perp * offset(),
                track_id: track.id,
                step: j,
                source_speed: speed,
            });
        }
    }
    out
}

pub fn scatter_points<R: Rng + ?Sized>(
    track: &TrackedObstacle,
    cfg: &PredictionConfig,
    rng: &mut R,
) -> Vec<VirtualPoint> {
    match cfg.offsets {
        OffsetModel::Gmm => scatter_points_with(track, cfg, || sample_gmm(&cfg.gmm, rng)),
        OffsetModel::Zero => scatter_points_with(track, cfg, || 0.0),
    }
}

/// Virtual points of all tracks, in track order.
pub fn predict<R: Rng + ?Sized>(
    tracks: &[TrackedObstacle],
    cfg: &PredictionConfig,
    rng: &mut R,
) -> Vec<VirtualPoint> {
    tracks
        .iter()
        .flat_map(|t| scatter_points(t, cfg, rng))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{Cluster, KalmanConfig};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn track(id: u64, p: Vec2, v: Vec2) -> TrackedObstacle {
        let mut t = TrackedObstacle::birth(
            id,
            Cluster::from_members(vec![0], vec![p]),
            0.0,
            &KalmanConfig::default(),
        );
        t.smoothed_velocity = v;
        t
    }

    #[test]
    fn presets_are_valid_and_centred() {
        GmmParams::SIM.validate().unwrap();
        GmmParams::REAL.validate().unwrap();
        assert_relative_eq!(GmmParams::SIM.mean(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(GmmParams::REAL.mean(), 0.045, epsilon = 1e-15);
    }

    #[test]
    fn bad_weights_rejected() {
        let mut g = GmmParams::SIM;
        g.weights = [0.5, 0.5, 0.5];
        assert!(matches!(g.validate(), Err(GmmError::Weights(_))));
        g.weights = [1.2, -0.1, -0.1];
        assert!(g.validate().is_err());
        let mut g = GmmParams::SIM;
        g.variances[1] = 0.0;
        assert_eq!(g.validate(), Err(GmmError::Variance));
    }

    #[test]
    fn slow_track_scatters_nothing() {
        let t = track(0, Vec2::zeros(), Vec2::new(0.2, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(scatter_points(&t, &PredictionConfig::default(), &mut rng).is_empty());
        let at = track(0, Vec2::zeros(), Vec2::new(0.3, 0.0));
        assert!(scatter_points(&at, &PredictionConfig::default(), &mut rng).is_empty());
    }

    #[test]
    fn zero_offset_first_step() {
        let t = track(0, Vec2::zeros(), Vec2::new(1.0, 0.0));
        let cfg = PredictionConfig {
            step_size: StepSize::Fixed(0.1),
            samples_per_step: 1,
            ..Default::default()
        };
        let pts = scatter_points_with(&t, &cfg, || 0.0);
        assert_eq!(pts[0].step, 1);
        assert_relative_eq!(pts[0].position, Vec2::new(0.1, 0.0), epsilon = 1e-9);
    }

    #[test]
    fn lateral_offset_third_step() {
        let t = track(0, Vec2::zeros(), Vec2::new(0.0, 2.0));
        let cfg = PredictionConfig {
            step_size: StepSize::Fixed(0.1),
            samples_per_step: 1,
            ..Default::default()
        };
        let pts = scatter_points_with(&t, &cfg, || 0.05);
        assert_eq!(pts[2].step, 3);
        assert_relative_eq!(pts[2].position, Vec2::new(-0.05, 0.3), epsilon = 1e-9);
    }

    #[test]
    fn point_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let one = PredictionConfig {
            samples_per_step: 1,
            ..Default::default()
        };
        assert!(predict(&[], &one, &mut rng).is_empty());
        let fast = track(0, Vec2::zeros(), Vec2::new(1.0, 0.5));
        assert_eq!(predict(&[fast.clone()], &one, &mut rng).len(), 20);
        let other = track(1, Vec2::new(3.0, 3.0), Vec2::new(-1.0, 0.0));
        let three = PredictionConfig::default();
        assert_eq!(predict(&[fast, other], &three, &mut rng).len(), 120);
    }

    #[test]
    fn speed_scaled_steps() {
        let t = track(0, Vec2::new(1.0, 1.0), Vec2::new(1.5, 0.0));
        let cfg = PredictionConfig {
            offsets: OffsetModel::Zero,
            ..Default::default()
        };
        let pts = scatter_points(&t, &cfg, &mut ChaCha8Rng::seed_from_u64(0));
        let last = pts.last().unwrap();
        assert_eq!(last.step, 20);
        assert_relative_eq!(last.position, Vec2::new(1.0 + 20.0 * 0.15, 1.0), epsilon = 1e-9);
        assert_relative_eq!(last.source_speed, 1.5);
    }
}
