#![allow(dead_code)]

use std::collections::BTreeSet;

use mfnav::perception::DbscanResult;
use mfnav::planner::{build_reference, cost, ConstraintPoint, PlannerConfig, PointOrigin, ReferenceTrajectory};
use mfnav::{ControlCommand, Pose2D, RobotState, Vec2};
use rand::Rng;

/// Partition as (sorted clusters of sorted indices, sorted noise).
pub type Partition = (Vec<Vec<usize>>, Vec<usize>);

pub fn partition_of(r: &DbscanResult) -> Partition {
    let mut clusters: Vec<Vec<usize>> = r.clusters.iter().map(|c| c.indices.clone()).collect();
    clusters.sort();
    (clusters, r.noise.clone())
}

/// O(n^2) DBSCAN straight from the definition: cores have at least
/// `min_pts` points (themselves included) within `eps`; cores within `eps`
/// of each other share a cluster; a border point joins the cluster of its
/// nearest core, ties going to the lexicographically smaller core.
pub fn brute_dbscan(pts: &[Vec2], eps: f64, min_pts: usize) -> Partition {
    let n = pts.len();
    let near = |i: usize, j: usize| (pts[i] - pts[j]).norm_squared() <= eps * eps;
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();

    let mut root: Vec<usize> = (0..n).collect();
    fn find(root: &mut [usize], mut i: usize) -> usize {
        while root[i] != i {
            root[i] = root[root[i]];
            i = root[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if core[i] && core[j] && near(i, j) {
                let (a, b) = (find(&mut root, i), find(&mut root, j));
                root[a.max(b)] = a.min(b);
            }
        }
    }

    let mut label = vec![None; n];
    for i in 0..n {
        if core[i] {
            label[i] = Some(find(&mut root, i));
        }
    }
    for i in 0..n {
        if core[i] {
            continue;
        }
        let mut best: Option<usize> = None;
        for j in 0..n {
            if !core[j] || !near(i, j) {
                continue;
            }
            best = match best {
                None => Some(j),
                Some(b) => {
                    let (dj, db) = ((pts[j] - pts[i]).norm_squared(), (pts[b] - pts[i]).norm_squared());
                    let lex = (pts[j].x, pts[j].y) < (pts[b].x, pts[b].y);
                    if dj < db || (dj == db && lex) {
                        Some(j)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        label[i] = best.map(|b| find(&mut root, b));
    }

    let roots: BTreeSet<usize> = label.iter().flatten().copied().collect();
    let mut clusters: Vec<Vec<usize>> = roots
        .iter()
        .map(|r| (0..n).filter(|&i| label[i] == Some(*r)).collect())
        .collect();
    clusters.sort();
    let noise = (0..n).filter(|&i| label[i].is_none()).collect();
    (clusters, noise)
}

/// Blobs plus background clutter, so clusters, borders and noise all
/// show up.
pub fn random_cloud<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec2> {
    let blobs = rng.random_range(1..=4);
    let centers: Vec<Vec2> = (0..blobs)
        .map(|_| Vec2::new(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)))
        .collect();
    (0..n)
        .map(|_| {
            if rng.random_bool(0.7) {
                let c = centers[rng.random_range(0..blobs)];
                let s = rng.random_range(0.2..1.5);
                c + Vec2::new(rng.random_range(-s..s), rng.random_range(-s..s))
            } else {
                Vec2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0))
            }
        })
        .collect()
}

pub struct Instance {
    pub controls: Vec<ControlCommand>,
    pub state: RobotState,
    pub reference: ReferenceTrajectory,
    pub points: Vec<ConstraintPoint>,
    pub cfg: PlannerConfig,
}

/// Random planner problem with points scattered close to the rollout so
/// the hinge is active for a good share of them.
pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    let cfg = PlannerConfig {
        horizon: rng.random_range(2..=10),
        kappa: rng.random_range(0.0..2.0),
        ..PlannerConfig::default()
    };
    let state = RobotState {
        pose: Pose2D::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-3.0..3.0)),
        v: 0.0,
        omega: 0.0,
    };
    let controls: Vec<ControlCommand> = (0..cfg.horizon)
        .map(|_| ControlCommand::new(rng.random_range(-1.0..1.5), rng.random_range(-1.5..1.5)))
        .collect();
    let waypoints: Vec<Vec2> = (0..5)
        .map(|i| Vec2::new(i as f64 * 2.0 + rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0)))
        .collect();
    let reference = build_reference(&waypoints, state.pose.position(), cfg.v_ref, cfg.dt, cfg.horizon);
    let path = mfnav::planner::rollout(state.pose, &controls, cfg.dt);
    let points = (0..rng.random_range(0..=20))
        .map(|_| {
            let s = path[rng.random_range(0..path.len())];
            let r = rng.random_range(0.45..1.0);
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            ConstraintPoint {
                position: Vec2::new(s[0] + r * a.cos(), s[1] + r * a.sin()),
                weight: 1.0 + rng.random_range(0.0..2.0),
                origin: if rng.random_bool(0.5) { PointOrigin::CurrentScan } else { PointOrigin::Virtual },
            }
        })
        .collect();
    Instance {
        controls,
        state,
        reference,
        points,
        cfg,
    }
}

/// Central finite differences of the total cost, step `h`.
pub fn numeric_gradient(inst: &Instance, h: f64) -> Vec<[f64; 2]> {
    let f = |u: &[ControlCommand]| cost(u, &inst.state, &inst.reference, &inst.points, &inst.cfg).total;
    let mut out = vec![[0.0; 2]; inst.controls.len()];
    for k in 0..inst.controls.len() {
        for c in 0..2 {
            let mut plus = inst.controls.clone();
            let mut minus = inst.controls.clone();
            if c == 0 {
                plus[k].v += h;
                minus[k].v -= h;
            } else {
                plus[k].omega += h;
                minus[k].omega -= h;
            }
            out[k][c] = (f(&plus) - f(&minus)) / (2.0 * h);
        }
    }
    out
}

/// Largest component-wise relative error, with the denominator floored so
/// near-zero components compare absolutely.
pub fn max_relative_error(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let scale = a
        .iter()
        .chain(b)
        .flat_map(|g| g.iter().map(|x| x.abs()))
        .fold(1.0, f64::max);
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| (0..2).map(move |c| (x[c] - y[c]).abs() / scale))
        .fold(0.0, f64::max)
}

/// Straight-line re-evaluation of the objective: explicit loops, no shared
/// code with the library beyond the data types.
pub fn naive_cost(inst: &Instance) -> f64 {
    let cfg = &inst.cfg;
    let (mut x, mut y, mut th) = (inst.state.pose.x, inst.state.pose.y, inst.state.pose.theta);
    let mut total = 0.0;
    for (k, u) in inst.controls.iter().enumerate() {
        total += cfg.r[0] * u.v * u.v + cfg.r[1] * u.omega * u.omega;
        x += u.v * th.cos() * cfg.dt;
        y += u.v * th.sin() * cfg.dt;
        th += u.omega * cfg.dt;
        let r = inst.reference.states[k + 1];
        let dth = (th - r.theta).sin().atan2((th - r.theta).cos());
        total += cfg.q[0] * (x - r.x).powi(2) + cfg.q[1] * (y - r.y).powi(2) + cfg.q[2] * dth * dth;
        for p in &inst.points {
            let gap = ((p.position.x - x).powi(2) + (p.position.y - y).powi(2)).sqrt() - cfg.footprint_radius;
            let viol = (cfg.d_safe - gap).max(0.0);
            total += cfg.rho1 * p.weight * viol * viol;
        }
    }
    total
}
