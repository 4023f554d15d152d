//! Track association, constant-velocity Kalman filtering and exponential
//! velocity smoothing.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Matrix4x2, Vector4};

use crate::geometry::Vec2;

use super::dbscan::Cluster;
use super::PerceptionError;

/// Noise model of the constant-velocity filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanConfig {
    /// White-noise acceleration standard deviation, m/s^2 per axis.
    pub process_noise: f64,
    /// Centroid measurement standard deviation, m per axis.
    pub measurement_noise: f64,
    /// Velocity variance assigned to a newborn track.
    pub initial_velocity_variance: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        KalmanConfig {
            process_noise: 0.05,
            measurement_noise: 0.05,
            initial_velocity_variance: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackedObstacle {
    pub id: u64,
    /// `(px, py, vx, vy)`.
    pub state: Vector4<f64>,
    pub covariance: Matrix4<f64>,
    pub smoothed_velocity: Vec2,
    /// Frames this track has been matched in, birth included.
    pub age: u32,
    /// Consecutive frames without a matching cluster.
    pub missed: u32,
    pub last_cluster: Cluster,
    /// Timestamp of the last measurement update.
    pub last_update: f64,
}

impl TrackedObstacle {
    /// Newborn track at the cluster centroid with zero velocity.
    pub fn birth(id: u64, cluster: Cluster, time: f64, cfg: &KalmanConfig) -> Self {
        let c = cluster.centroid;
        let r2 = cfg.measurement_noise * cfg.measurement_noise;
        let vv = cfg.initial_velocity_variance;
        TrackedObstacle {
            id,
            state: Vector4::new(c.x, c.y, 0.0, 0.0),
            covariance: Matrix4::from_diagonal(&Vector4::new(r2, r2, vv, vv)),
            smoothed_velocity: Vec2::zeros(),
            age: 1,
            missed: 0,
            last_cluster: cluster,
            last_update: time,
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.state[0], self.state[1])
    }

    /// Filter velocity before smoothing.
    pub fn raw_velocity(&self) -> Vec2 {
        Vec2::new(self.state[2], self.state[3])
    }

    pub fn speed(&self) -> f64 {
        self.smoothed_velocity.norm()
    }
}

/// Outcome of one association round.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Association {
    /// `(track id, cluster index)`.
    pub matches: Vec<(u64, usize)>,
    /// Cluster indices that start new tracks.
    pub births: Vec<usize>,
    /// Ids of tracks that exceeded the miss limit this round.
    pub deaths: Vec<u64>,
}

/// Greedy nearest-pair association on centroid distance.
///
/// All track/cluster pairs inside `gate` are visited in ascending distance
/// (ties: lower track id, then lower cluster index) and accepted when
/// neither side is taken yet.
pub fn match_clusters(
    tracks: &[TrackedObstacle],
    clusters: &[Cluster],
    gate: f64,
    miss_limit: u32,
) -> Association {
    let mut pairs: Vec<(f64, u64, usize, usize)> = Vec::new();
    for (ti, t) in tracks.iter().enumerate() {
        for (ci, c) in clusters.iter().enumerate() {
            let d = (t.position() - c.centroid).norm();
            if d <= gate {
                pairs.push((d, t.id, ci, ti));
            }
        }
    }
    pairs.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut track_used = vec![false; tracks.len()];
    let mut cluster_used = vec![false; clusters.len()];
    let mut matches = Vec::new();
    for (_, id, ci, ti) in pairs {
        if !track_used[ti] && !cluster_used[ci] {
            track_used[ti] = true;
            cluster_used[ci] = true;
            matches.push((id, ci));
        }
    }
    matches.sort_unstable();

    let births = (0..clusters.len()).filter(|&c| !cluster_used[c]).collect();
    let deaths = tracks
        .iter()
        .zip(&track_used)
        .filter(|(t, used)| !**used && t.missed + 1 > miss_limit)
        .map(|(t, _)| t.id)
        .collect();
    Association {
        matches,
        births,
        deaths,
    }
}

/// Result of one filter step.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanStep {
    pub track: TrackedObstacle,
    /// Velocity estimate after the update (the raw `v_k` fed to smoothing).
    pub velocity: Vec2,
    /// Measurement minus predicted position.
    pub innovation: Vec2,
}

/// Minimum eigenvalue tolerated before a covariance is rejected.
const PSD_TOL: f64 = -1e-9;

pub fn is_symmetric_psd(p: &Matrix4<f64>) -> bool {
    let scale = p.amax().max(1.0);
    if (p - p.transpose()).amax() > 1e-9 * scale {
        return false;
    }
    let eig = p.symmetric_eigen();
    eig.eigenvalues.min() >= PSD_TOL * scale
}

/// Constant-velocity predict over `dt` followed by a position update with
/// the measured centroid. The covariance update uses the Joseph form and is
/// re-symmetrised, so a PSD input stays PSD.
pub fn kalman_update(
    track: &TrackedObstacle,
    measured: Vec2,
    dt: f64,
    cfg: &KalmanConfig,
) -> Result<KalmanStep, PerceptionError> {
    if !(dt > 0.0) {
        return Err(PerceptionError::NonPositiveDt(dt));
    }
    if !is_symmetric_psd(&track.covariance) {
        return Err(PerceptionError::CovarianceNotPsd { track: track.id });
    }

    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    let q = cfg.process_noise * cfg.process_noise;
    let (dt2, dt3, dt4) = (dt * dt, dt * dt * dt, dt * dt * dt * dt);
    let mut qd = Matrix4::zeros();
    for axis in 0..2 {
        let (p, v) = (axis, axis + 2);
        qd[(p, p)] = dt4 / 4.0 * q;
        qd[(p, v)] = dt3 / 2.0 * q;
        qd[(v, p)] = dt3 / 2.0 * q;
        qd[(v, v)] = dt2 * q;
    }
    let x_pred = f * track.state;
    let p_pred = f * track.covariance * f.transpose() + qd;

    let h = Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
    let r = Matrix2::identity() * (cfg.measurement_noise * cfg.measurement_noise);
    let innovation = measured - h * x_pred;
    let s = h * p_pred * h.transpose() + r;
    let s_inv = s
        .try_inverse()
        .ok_or(PerceptionError::SingularInnovation { track: track.id })?;
    let k: Matrix4x2<f64> = p_pred * h.transpose() * s_inv;
    let x_new = x_pred + k * innovation;
    let i_kh = Matrix4::identity() - k * h;
    let p_new = i_kh * p_pred * i_kh.transpose() + k * r * k.transpose();
    let p_new = (p_new + p_new.transpose()) * 0.5;

    let mut out = track.clone();
    out.state = x_new;
    out.covariance = p_new;
    let velocity = out.raw_velocity();
    Ok(KalmanStep {
        track: out,
        velocity,
        innovation,
    })
}

/// Exponential smoothing `alpha * prev + (1 - alpha) * meas`, per component.
pub fn smooth_velocity(prev: Vec2, meas: Vec2, alpha: f64) -> Vec2 {
    prev * alpha + meas * (1.0 - alpha)
}
