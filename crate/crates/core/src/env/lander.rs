use serde::{Deserialize, Serialize};

use smallvec::SmallVec;

use super::geometry::{polygon_signed_distance, BoxSpec, Polygon};
use super::Margins;

/// Planar rigid-body lander over a polyline terrain.
///
/// State `[x, y, theta, vx, vy, omega]`; controls are `[main, side]` with
/// `main` in `{0, 1}` and `side` in `{-1, 0, 1}`, giving the four actions
/// noop, left engine, right engine and main engine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanderParams {
    pub gravity: f64,
    /// Acceleration of the main engine along the body axis.
    pub main_accel: f64,
    /// Lateral acceleration of a side engine along the body x axis.
    pub side_accel: f64,
    /// Angular acceleration of a side engine.
    pub side_angular_accel: f64,
    /// Terrain vertices ordered left to right; the first and last x are the side walls.
    pub terrain: Vec<[f64; 2]>,
    pub ceiling: f64,
    pub target: BoxSpec,
}

pub(crate) const LANDER_CONTROLS: [[f64; 2]; 4] = [[0.0, 0.0], [0.0, 1.0], [0.0, -1.0], [1.0, 0.0]];

impl Default for LanderParams {
    fn default() -> Self {
        Self {
            gravity: 1.6,
            main_accel: 3.0,
            side_accel: 0.3,
            side_angular_accel: 1.0,
            terrain: vec![
                [0.0, 4.0],
                [3.0, 2.5],
                [5.0, 2.0],
                [6.5, 4.5],
                [8.0, 2.0],
                [12.0, 2.0],
                [15.0, 2.5],
                [17.0, 3.0],
                [20.0, 4.0],
            ],
            ceiling: 13.0,
            target: BoxSpec::new([10.0, 3.2], [3.0, 2.0]),
        }
    }
}

impl LanderParams {
    /// Constraint polygon: terrain, right wall, ceiling, left wall.
    pub fn constraint_polygon(&self) -> Polygon {
        Polygon::new(self.constraint_vertices().into_vec())
    }

    fn constraint_vertices(&self) -> SmallVec<[[f64; 2]; 16]> {
        let mut vertices: SmallVec<[[f64; 2]; 16]> = self.terrain.iter().copied().collect();
        let first = self.terrain[0];
        let last = self.terrain[self.terrain.len() - 1];
        vertices.push([last[0], self.ceiling]);
        vertices.push([first[0], self.ceiling]);
        vertices
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        if self.terrain.len() < 2 {
            return Err("lander terrain needs at least two vertices".into());
        }
        if self.terrain.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err("lander terrain x coordinates must increase".into());
        }
        if self.terrain.iter().any(|v| v[1] >= self.ceiling) {
            return Err("lander terrain must lie below the ceiling".into());
        }
        if !self.target.is_valid() {
            return Err("invalid lander target box".into());
        }
        Ok(())
    }

    pub(crate) fn derivative(&self, s: &[f64], u: [f64; 2], out: &mut [f64]) {
        let (sin, cos) = s[2].sin_cos();
        let [main, side] = u;
        out[0] = s[3];
        out[1] = s[4];
        out[2] = s[5];
        out[3] = -main * self.main_accel * sin + side * self.side_accel * cos;
        out[4] = main * self.main_accel * cos + side * self.side_accel * sin - self.gravity;
        out[5] = -side * self.side_angular_accel;
    }

    /// `l` is the signed distance to the target box; `g` the signed distance
    /// to the constraint polygon, positive outside it.
    pub(crate) fn margins(&self, s: &[f64]) -> Margins {
        let p = [s[0], s[1]];
        Margins {
            l: self.target.signed_distance(p),
            g: polygon_signed_distance(&self.constraint_vertices(), p),
        }
    }
}
