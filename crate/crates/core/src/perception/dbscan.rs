//! Density-based clustering of planar points.
//!
//! Core points have at least `min_pts` neighbours (self included) within
//! `epsilon`. Clusters are the connected components of the core-point
//! graph. A border point (non-core, but within `epsilon` of some core point)
//! joins the cluster of its nearest core neighbour, ties broken by the core
//! point's coordinates. That rule makes the partition independent of input
//! order, which the textbook "first cluster to reach it" rule is not.

use std::cmp::Ordering;
use std::collections::VecDeque;

use crate::exec::Execution;
use crate::geometry::Vec2;

use super::grid::GridIndex;
use super::PointCloud2D;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbscanParams {
    pub epsilon: f64,
    pub min_pts: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        DbscanParams {
            epsilon: 1.0,
            min_pts: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Indices into the clustered cloud, ascending.
    pub indices: Vec<usize>,
    pub members: Vec<Vec2>,
    pub centroid: Vec2,
    /// Largest member distance from the centroid.
    pub radius: f64,
}

impl Cluster {
    pub fn from_members(indices: Vec<usize>, members: Vec<Vec2>) -> Self {
        assert!(!members.is_empty(), "cluster needs at least one member");
        let centroid = members.iter().fold(Vec2::zeros(), |a, p| a + p) / members.len() as f64;
        let radius = members
            .iter()
            .map(|p| (p - centroid).norm())
            .fold(0.0, f64::max);
        Cluster {
            indices,
            members,
            centroid,
            radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DbscanResult {
    /// Ordered by each cluster's lexicographically smallest member.
    pub clusters: Vec<Cluster>,
    pub noise: Vec<usize>,
}

pub fn dbscan(cloud: &PointCloud2D, params: DbscanParams) -> DbscanResult {
    dbscan_with(cloud, params, Execution::default())
}

pub fn dbscan_with(cloud: &PointCloud2D, params: DbscanParams, exec: Execution) -> DbscanResult {
    let pts = &cloud.points;
    let n = pts.len();
    if n == 0 {
        return DbscanResult::default();
    }
    let grid = GridIndex::new(pts, params.epsilon);
    let neighbors = exec.map_range(n, |i| grid.within(pts, pts[i], params.epsilon));
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= params.min_pts).collect();

    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut n_clusters = 0;
    let mut queue = VecDeque::new();
    for seed in 0..n {
        if !core[seed] || label[seed].is_some() {
            continue;
        }
        label[seed] = Some(n_clusters);
        queue.push_back(seed);
        while let Some(i) = queue.pop_front() {
            for &j in &neighbors[i] {
                if core[j] && label[j].is_none() {
                    label[j] = Some(n_clusters);
                    queue.push_back(j);
                }
            }
        }
        n_clusters += 1;
    }

    for i in 0..n {
        if core[i] {
            continue;
        }
        let nearest_core = neighbors[i]
            .iter()
            .copied()
            .filter(|&j| core[j])
            .min_by(|&a, &b| {
                let da = (pts[a] - pts[i]).norm_squared();
                let db = (pts[b] - pts[i]).norm_squared();
                da.total_cmp(&db).then_with(|| lex(pts[a], pts[b]))
            });
        label[i] = nearest_core.and_then(|j| label[j]);
    }

    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_clusters];
    let mut noise = Vec::new();
    for (i, l) in label.iter().enumerate() {
        match l {
            Some(c) => groups[*c].push(i),
            None => noise.push(i),
        }
    }
    let mut clusters: Vec<Cluster> = groups
        .into_iter()
        .map(|idx| {
            let members = idx.iter().map(|&i| pts[i]).collect();
            Cluster::from_members(idx, members)
        })
        .collect();
    clusters.sort_by(|a, b| lex(min_member(a), min_member(b)));
    DbscanResult { clusters, noise }
}

fn lex(a: Vec2, b: Vec2) -> Ordering {
    a.x.total_cmp(&b.x).then_with(|| a.y.total_cmp(&b.y))
}

fn min_member(c: &Cluster) -> Vec2 {
    *c.members
        .iter()
        .min_by(|a, b| lex(**a, **b))
        .expect("non-empty cluster")
}
