use serde::{Deserialize, Serialize};

use super::geometry::BoxSpec;
use super::Margins;

/// Point particle drifting upward at `vy` with steerable horizontal speed `u * vx`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleParams {
    pub vx: f64,
    pub vy: f64,
    pub boundary: BoxSpec,
    pub target: BoxSpec,
    #[serde(default)]
    pub obstacles: Vec<BoxSpec>,
}

pub(crate) const PARTICLE_CONTROLS: [f64; 3] = [-1.0, 0.0, 1.0];

impl ParticleParams {
    /// Three-obstacle layout over the `[-2, 2] x [-2, 10]` domain.
    pub fn three_obstacles() -> Self {
        Self {
            vx: 2.0,
            vy: 2.0,
            boundary: BoxSpec::new([0.0, 4.0], [4.0, 12.0]),
            target: BoxSpec::new([0.0, 8.5], [1.5, 1.0]),
            obstacles: vec![
                BoxSpec::new([-1.25, 2.0], [1.5, 0.5]),
                BoxSpec::new([1.25, 2.0], [1.5, 0.5]),
                BoxSpec::new([0.0, 5.0], [1.5, 0.5]),
            ],
        }
    }

    /// Two thin obstacles leaving a narrow central gap below the target.
    pub fn thin_obstacles() -> Self {
        Self {
            vx: 2.0,
            vy: 2.0,
            boundary: BoxSpec::new([0.0, 4.0], [4.0, 12.0]),
            target: BoxSpec::new([0.0, 8.5], [1.0, 1.0]),
            obstacles: vec![
                BoxSpec::new([-1.1, 4.0], [1.8, 0.1]),
                BoxSpec::new([1.1, 4.0], [1.8, 0.1]),
            ],
        }
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        if !(self.vx > 0.0 && self.vy > 0.0) {
            return Err("particle speeds must be positive".into());
        }
        let boxes = std::iter::once(&self.boundary)
            .chain(std::iter::once(&self.target))
            .chain(self.obstacles.iter());
        for b in boxes {
            if !b.is_valid() {
                return Err(format!("invalid box {b:?}"));
            }
        }
        Ok(())
    }

    pub(crate) fn derivative(&self, _s: &[f64], u: f64, out: &mut [f64]) {
        out[0] = u * self.vx;
        out[1] = self.vy;
    }

    pub(crate) fn margins(&self, s: &[f64]) -> Margins {
        let p = [s[0], s[1]];
        let g_boundary = self.boundary.margin(p);
        let g_obstacles = self
            .obstacles
            .iter()
            .map(|o| -o.margin(p))
            .fold(f64::NEG_INFINITY, f64::max);
        Margins {
            l: self.target.margin(p),
            g: g_boundary.max(g_obstacles),
        }
    }
}
