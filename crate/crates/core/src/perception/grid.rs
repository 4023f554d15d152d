use std::collections::HashMap;

use crate::geometry::Vec2;

/// Uniform hash grid for fixed-radius neighbour queries.
pub(crate) struct GridIndex {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl GridIndex {
    pub fn new(points: &[Vec2], cell: f64) -> Self {
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(key(*p, cell)).or_default().push(i);
        }
        GridIndex { cell, cells }
    }

    /// Indices of all points within `radius` of `center` (inclusive),
    /// ascending.
    pub fn within(&self, points: &[Vec2], center: Vec2, radius: f64) -> Vec<usize> {
        let (cx, cy) = key(center, self.cell);
        let reach = (radius / self.cell).ceil() as i64;
        let r2 = radius * radius;
        let mut out = Vec::new();
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                if let Some(ids) = self.cells.get(&(cx + dx, cy + dy)) {
                    out.extend(
                        ids.iter()
                            .copied()
                            .filter(|&j| (points[j] - center).norm_squared() <= r2),
                    );
                }
            }
        }
        out.sort_unstable();
        out
    }
}

fn key(p: Vec2, cell: f64) -> (i64, i64) {
    ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
}
