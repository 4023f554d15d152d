//! Multi-frame obstacle motion estimation.
//!
//! Each lidar scan is band-filtered, projected and grid-downsampled into a
//! [`PointCloud2D`], expressed in the odometry frame and pushed into a
//! [`FrameBuffer`] holding the last [`FRAME_HISTORY`] frames. [`perceive`]
//! walks every frame the tracker has not yet consumed: kernel smoothing,
//! DBSCAN, association, Kalman update and exponential velocity smoothing.

mod dbscan;
mod grid;
mod tracking;

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::exec::Execution;
use crate::geometry::{Pose2D, Vec2};
use crate::lidar::LidarScan;

pub use dbscan::{dbscan, dbscan_with, Cluster, DbscanParams, DbscanResult};
pub use tracking::{
    is_symmetric_psd, kalman_update, match_clusters, smooth_velocity, Association, KalmanConfig,
    KalmanStep, TrackedObstacle,
};

use grid::GridIndex;

/// Number of frames kept for motion estimation.
pub const FRAME_HISTORY: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("track {track}: covariance is not symmetric positive semidefinite")]
    CovarianceNotPsd { track: u64 },
    #[error("track {track}: innovation covariance is singular")]
    SingularInnovation { track: u64 },
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("frame at t={got} is older than the newest buffered frame t={newest}")]
    OutOfOrderFrame { newest: f64, got: f64 },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud2D {
    pub points: Vec<Vec2>,
    pub timestamp: f64,
}

impl PointCloud2D {
    pub fn new(points: Vec<Vec2>, timestamp: f64) -> Self {
        PointCloud2D { points, timestamp }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Re-expresses body-frame points in the frame `pose` lives in.
    pub fn to_parent_frame(&self, pose: &Pose2D) -> PointCloud2D {
        PointCloud2D {
            points: self.points.iter().map(|p| pose.transform_point(*p)).collect(),
            timestamp: self.timestamp,
        }
    }
}

/// Keeps returns with `z` in `z_band` (inclusive), drops height and keeps
/// one centroid per occupied `cell` x `cell` grid square.
pub fn preprocess_scan(scan: &LidarScan, z_band: (f64, f64), cell: f64) -> PointCloud2D {
    assert!(cell > 0.0, "downsample cell must be positive");
    let mut cells: BTreeMap<(i64, i64), (Vec2, usize)> = BTreeMap::new();
    for p in &scan.points {
        if p[2] < z_band.0 || p[2] > z_band.1 {
            continue;
        }
        let key = ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
        let e = cells.entry(key).or_insert((Vec2::zeros(), 0));
        e.0 += Vec2::new(p[0], p[1]);
        e.1 += 1;
    }
    PointCloud2D {
        points: cells.values().map(|(s, n)| s / *n as f64).collect(),
        timestamp: scan.timestamp,
    }
}

/// Replaces each point by the Gaussian-weighted mean of all points within
/// `3 * sigma` of it, itself included.
pub fn gaussian_filter(cloud: &PointCloud2D, sigma: f64) -> PointCloud2D {
    gaussian_filter_with(cloud, sigma, Execution::default())
}

pub fn gaussian_filter_with(cloud: &PointCloud2D, sigma: f64, exec: Execution) -> PointCloud2D {
    assert!(sigma > 0.0, "kernel bandwidth must be positive");
    let pts = &cloud.points;
    let radius = 3.0 * sigma;
    let grid = GridIndex::new(pts, radius);
    let inv = 1.0 / (2.0 * sigma * sigma);
    let points = exec.map_range(pts.len(), |i| {
        let mut acc = Vec2::zeros();
        let mut wsum = 0.0;
        for j in grid.within(pts, pts[i], radius) {
            let w = (-(pts[j] - pts[i]).norm_squared() * inv).exp();
            acc += pts[j] * w;
            wsum += w;
        }
        acc / wsum
    });
    PointCloud2D {
        points,
        timestamp: cloud.timestamp,
    }
}

/// Ring of the most recent preprocessed frames, oldest first.
#[derive(Debug, Clone, Default)]
pub struct FrameBuffer {
    frames: VecDeque<PointCloud2D>,
}

impl FrameBuffer {
    pub fn new() -> Self {
        FrameBuffer {
            frames: VecDeque::with_capacity(FRAME_HISTORY),
        }
    }

    pub fn capacity(&self) -> usize {
        FRAME_HISTORY
    }

    /// Appends a frame, evicting the oldest when full.
    pub fn push(&mut self, cloud: PointCloud2D) -> Result<(), PerceptionError> {
        if let Some(newest) = self.frames.back() {
            if cloud.timestamp < newest.timestamp {
                return Err(PerceptionError::OutOfOrderFrame {
                    newest: newest.timestamp,
                    got: cloud.timestamp,
                });
            }
        }
        if self.frames.len() == FRAME_HISTORY {
            self.frames.pop_front();
        }
        self.frames.push_back(cloud);
        Ok(())
    }

    pub fn newest(&self) -> Option<&PointCloud2D> {
        self.frames.back()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PointCloud2D> {
        self.frames.iter()
    }

    pub fn clear(&mut self) {
        self.frames.clear();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionConfig {
    /// Downsampling grid size used by [`preprocess_scan`].
    pub downsample_cell: f64,
    pub gaussian_sigma: f64,
    pub dbscan: DbscanParams,
    /// Association gate on centroid distance, m.
    pub gate: f64,
    pub miss_limit: u32,
    /// Exponential smoothing factor applied to filter velocities.
    pub alpha: f64,
    pub kalman: KalmanConfig,
    /// Clusters wider than this (walls, large static structure) are not
    /// tracked; their visible centroid slides as the robot moves.
    pub max_track_radius: f64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        PerceptionConfig {
            downsample_cell: 0.05,
            gaussian_sigma: 0.05,
            dbscan: DbscanParams::default(),
            gate: 1.0,
            miss_limit: 3,
            alpha: 0.7,
            kalman: KalmanConfig::default(),
            max_track_radius: 1.0,
        }
    }
}

/// Live tracks plus the bookkeeping needed to resume on the next frame.
#[derive(Debug, Clone)]
pub struct Tracker {
    pub config: PerceptionConfig,
    tracks: Vec<TrackedObstacle>,
    next_id: u64,
    last_frame: Option<f64>,
}

impl Tracker {
    pub fn new(config: PerceptionConfig) -> Self {
        Tracker {
            config,
            tracks: Vec::new(),
            next_id: 0,
            last_frame: None,
        }
    }

    pub fn tracks(&self) -> &[TrackedObstacle] {
        &self.tracks
    }

    pub fn reset(&mut self) {
        self.tracks.clear();
        self.next_id = 0;
        self.last_frame = None;
    }

    fn ingest(&mut self, frame: &PointCloud2D, exec: Execution) -> Result<(), PerceptionError> {
        let cfg = &self.config;
        let t = frame.timestamp;
        let smoothed = gaussian_filter_with(frame, cfg.gaussian_sigma, exec);
        let clusters: Vec<Cluster> = dbscan_with(&smoothed, cfg.dbscan, exec)
            .clusters
            .into_iter()
            .filter(|c| c.radius <= cfg.max_track_radius)
            .collect();
        let assoc = match_clusters(&self.tracks, &clusters, cfg.gate, cfg.miss_limit);

        let mut next = Vec::with_capacity(self.tracks.len() + assoc.births.len());
        for track in &self.tracks {
            if let Some(&(_, ci)) = assoc.matches.iter().find(|(id, _)| *id == track.id) {
                let cluster = &clusters[ci];
                let step = kalman_update(track, cluster.centroid, t - track.last_update, &cfg.kalman)?;
                let mut updated = step.track;
                updated.smoothed_velocity =
                    smooth_velocity(track.smoothed_velocity, step.velocity, cfg.alpha);
                updated.age += 1;
                updated.missed = 0;
                updated.last_cluster = cluster.clone();
                updated.last_update = t;
                next.push(updated);
            } else if !assoc.deaths.contains(&track.id) {
                let mut kept = track.clone();
                kept.missed += 1;
                next.push(kept);
            }
        }
        for &ci in &assoc.births {
            next.push(TrackedObstacle::birth(
                self.next_id,
                clusters[ci].clone(),
                t,
                &cfg.kalman,
            ));
            self.next_id += 1;
        }
        self.tracks = next;
        self.last_frame = Some(t);
        Ok(())
    }
}

/// Brings the tracker up to date with every buffered frame newer than the
/// last one it consumed and returns the live tracks.
pub fn perceive(
    buffer: &FrameBuffer,
    tracker: &mut Tracker,
) -> Result<Vec<TrackedObstacle>, PerceptionError> {
    perceive_with(buffer, tracker, Execution::default())
}

pub fn perceive_with(
    buffer: &FrameBuffer,
    tracker: &mut Tracker,
    exec: Execution,
) -> Result<Vec<TrackedObstacle>, PerceptionError> {
    for frame in buffer.iter() {
        if tracker.last_frame.is_some_and(|t| frame.timestamp <= t) {
            continue;
        }
        tracker.ingest(frame, exec)?;
    }
    Ok(tracker.tracks.clone())
}
