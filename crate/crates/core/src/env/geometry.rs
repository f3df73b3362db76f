//! Planar margin geometry: axis-aligned boxes and simple polygons.

use serde::{Deserialize, Serialize};

/// Axis-aligned box given by its center and side lengths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub center: [f64; 2],
    pub size: [f64; 2],
}

impl BoxSpec {
    pub const fn new(center: [f64; 2], size: [f64; 2]) -> Self {
        Self { center, size }
    }

    pub fn is_valid(&self) -> bool {
        self.size.iter().all(|l| *l > 0.0 && l.is_finite()) && self.center.iter().all(|c| c.is_finite())
    }

    /// Max-of-coordinates margin `max_i |p_i - c_i| - L_i / 2`.
    ///
    /// Non-positive exactly on the closed box and 1-Lipschitz in every norm
    /// that dominates the sup norm.
    pub fn margin(&self, p: [f64; 2]) -> f64 {
        let dx = (p[0] - self.center[0]).abs() - 0.5 * self.size[0];
        let dy = (p[1] - self.center[1]).abs() - 0.5 * self.size[1];
        dx.max(dy)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (p[0] - self.center[0]).abs() <= 0.5 * self.size[0]
            && (p[1] - self.center[1]).abs() <= 0.5 * self.size[1]
    }

    /// Signed Euclidean distance to the box boundary, negative inside.
    pub fn signed_distance(&self, p: [f64; 2]) -> f64 {
        let qx = (p[0] - self.center[0]).abs() - 0.5 * self.size[0];
        let qy = (p[1] - self.center[1]).abs() - 0.5 * self.size[1];
        let outside = qx.max(0.0).hypot(qy.max(0.0));
        let inside = qx.max(qy).min(0.0);
        outside + inside
    }
}

/// Simple (non self-intersecting) polygon, vertices in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<[f64; 2]>,
}

impl Polygon {
    pub fn new(vertices: Vec<[f64; 2]>) -> Self {
        Self { vertices }
    }

    /// Even-odd point-in-polygon test. Points on the boundary count as inside.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        polygon_contains(&self.vertices, p)
    }

    pub fn boundary_distance(&self, p: [f64; 2]) -> f64 {
        polygon_boundary_distance(&self.vertices, p)
    }

    /// Signed Euclidean distance to the boundary: negative inside, positive outside.
    pub fn signed_distance(&self, p: [f64; 2]) -> f64 {
        polygon_signed_distance(&self.vertices, p)
    }
}

fn edges(vertices: &[[f64; 2]]) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
    let n = vertices.len();
    (0..n).map(move |i| (vertices[i], vertices[(i + 1) % n]))
}

pub fn polygon_boundary_distance(vertices: &[[f64; 2]], p: [f64; 2]) -> f64 {
    edges(vertices)
        .map(|(a, b)| segment_distance(p, a, b))
        .fold(f64::INFINITY, f64::min)
}

pub fn polygon_contains(vertices: &[[f64; 2]], p: [f64; 2]) -> bool {
    if polygon_boundary_distance(vertices, p) == 0.0 {
        return true;
    }
    crossing_parity(vertices, p)
}

fn crossing_parity(vertices: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut inside = false;
    for (a, b) in edges(vertices) {
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x_cross = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

pub fn polygon_signed_distance(vertices: &[[f64; 2]], p: [f64; 2]) -> f64 {
    let d = polygon_boundary_distance(vertices, p);
    if d == 0.0 {
        0.0
    } else if crossing_parity(vertices, p) {
        -d
    } else {
        d
    }
}

pub fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (abx, aby) = (b[0] - a[0], b[1] - a[1]);
    let (apx, apy) = (p[0] - a[0], p[1] - a[1]);
    let len2 = abx * abx + aby * aby;
    let t = if len2 > 0.0 {
        ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (apx - t * abx).hypot(apy - t * aby)
}
