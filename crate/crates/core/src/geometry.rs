//! Planar primitives shared by the simulator, perception and planner.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub type Vec2 = nalgebra::Vector2<f64>;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let a = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if a <= -PI {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Planar pose. `theta` is kept in `(-pi, pi]` by every constructor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2D {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Maps a point from this pose's body frame into the parent frame.
    pub fn transform_point(&self, p: Vec2) -> Vec2 {
        let (s, c) = self.theta.sin_cos();
        Vec2::new(self.x + c * p.x - s * p.y, self.y + s * p.x + c * p.y)
    }

    /// Maps a point from the parent frame into this pose's body frame.
    pub fn inverse_transform_point(&self, p: Vec2) -> Vec2 {
        let (s, c) = self.theta.sin_cos();
        let d = p - self.position();
        Vec2::new(c * d.x + s * d.y, -s * d.x + c * d.y)
    }
}

/// Obstacle outline, expressed relative to the obstacle's reference position.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Disc { radius: f64 },
    /// Convex, counter-clockwise vertices.
    Polygon { vertices: Vec<Vec2> },
}

impl Shape {
    /// Signed distance from `point` to the outline placed at `center`
    /// (negative inside).
    pub fn signed_distance(&self, center: Vec2, point: Vec2) -> f64 {
        match self {
            Shape::Disc { radius } => (point - center).norm() - radius,
            Shape::Polygon { vertices } => {
                let local = point - center;
                let n = vertices.len();
                let mut min_d = f64::INFINITY;
                let mut inside = true;
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    min_d = min_d.min(point_segment_distance(local, a, b));
                    if cross(b - a, local - a) < 0.0 {
                        inside = false;
                    }
                }
                if inside {
                    -min_d
                } else {
                    min_d
                }
            }
        }
    }

    /// Distance along the unit ray `origin + t*dir` to the first boundary
    /// crossing with `t > 0`, if any.
    pub fn ray_hit(&self, center: Vec2, origin: Vec2, dir: Vec2) -> Option<f64> {
        match self {
            Shape::Disc { radius } => ray_circle(origin, dir, center, *radius),
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                let mut best: Option<f64> = None;
                for i in 0..n {
                    let a = center + vertices[i];
                    let b = center + vertices[(i + 1) % n];
                    if let Some(t) = ray_segment(origin, dir, a, b) {
                        best = Some(best.map_or(t, |bt: f64| bt.min(t)));
                    }
                }
                best
            }
        }
    }

    /// Radius of the smallest origin-centred disc containing the outline.
    pub fn bounding_radius(&self) -> f64 {
        match self {
            Shape::Disc { radius } => *radius,
            Shape::Polygon { vertices } => vertices.iter().map(|v| v.norm()).fold(0.0, f64::max),
        }
    }

    /// True when the vertex loop is convex and counter-clockwise.
    pub fn is_convex_ccw(vertices: &[Vec2]) -> bool {
        let n = vertices.len();
        if n < 3 {
            return false;
        }
        let mut area2 = 0.0;
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if cross(b - a, c - b) < 0.0 {
                return false;
            }
            area2 += cross(a, b);
        }
        area2 > 0.0
    }
}

pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

pub fn ray_circle(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let b = oc.dot(&dir);
    let c = oc.norm_squared() - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = -b - sq;
    let t1 = -b + sq;
    if t0 > 0.0 {
        Some(t0)
    } else if t1 > 0.0 {
        Some(t1)
    } else {
        None
    }
}

pub fn ray_segment(origin: Vec2, dir: Vec2, a: Vec2, b: Vec2) -> Option<f64> {
    let e = b - a;
    let denom = cross(dir, e);
    if denom.abs() < 1e-15 {
        return None;
    }
    let ao = a - origin;
    let t = cross(ao, e) / denom;
    let u = cross(ao, dir) / denom;
    if t > 0.0 && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}
