use crate::geometry::{Pose2D, Vec2};

/// Reference states `s_0 ..= s_H` for one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub states: Vec<Pose2D>,
}

/// Polyline through the waypoints with cumulative arc length.
struct Polyline<'a> {
    pts: &'a [Vec2],
    cum: Vec<f64>,
}

impl<'a> Polyline<'a> {
    fn new(pts: &'a [Vec2]) -> Self {
        let mut cum = vec![0.0];
        for w in pts.windows(2) {
            let last = *cum.last().unwrap();
            cum.push(last + (w[1] - w[0]).norm());
        }
        Polyline { pts, cum }
    }

    fn total(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    /// Arc length of the closest polyline point to `p` (first segment wins
    /// ties).
    fn project(&self, p: Vec2) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..self.pts.len().saturating_sub(1) {
            let a = self.pts[i];
            let ab = self.pts[i + 1] - a;
            let len2 = ab.norm_squared();
            let t = if len2 == 0.0 {
                0.0
            } else {
                ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
            };
            let d = (p - (a + ab * t)).norm();
            if d < best.0 {
                best = (d, self.cum[i] + t * len2.sqrt());
            }
        }
        best.1
    }

    /// Point and tangent heading at arc length `s` (clamped to the ends).
    fn sample(&self, s: f64) -> Pose2D {
        let s = s.clamp(0.0, self.total());
        let n = self.pts.len();
        let mut heading = None;
        for i in 0..n - 1 {
            let len = self.cum[i + 1] - self.cum[i];
            if len == 0.0 {
                continue;
            }
            let ab = self.pts[i + 1] - self.pts[i];
            heading = Some(ab.y.atan2(ab.x));
            if s <= self.cum[i + 1] {
                let p = self.pts[i] + ab * ((s - self.cum[i]) / len);
                return Pose2D::new(p.x, p.y, heading.unwrap());
            }
        }
        let p = self.pts[n - 1];
        Pose2D::new(p.x, p.y, heading.unwrap_or(0.0))
    }
}

/// Marches `horizon + 1` reference states along the waypoint polyline at
/// `v_ref * dt` per step, starting from the robot's projection onto it.
/// Beyond the last waypoint the reference holds the final point.
pub fn build_reference(
    waypoints: &[Vec2],
    robot: Vec2,
    v_ref: f64,
    dt: f64,
    horizon: usize,
) -> ReferenceTrajectory {
    assert!(!waypoints.is_empty(), "reference needs waypoints");
    let line = Polyline::new(waypoints);
    let s0 = line.project(robot);
    let states = (0..=horizon)
        .map(|k| line.sample(s0 + k as f64 * v_ref * dt))
        .collect();
    ReferenceTrajectory { states }
}
