use serde::{Deserialize, Serialize};

use super::Margins;

/// Constant-speed Dubins car in a disc, aiming for a concentric inner disc.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DubinsParams {
    /// Forward speed.
    pub v: f64,
    /// Turn rate magnitude; controls are `{omega, 0, -omega}`.
    pub omega: f64,
    /// Target radius.
    pub r: f64,
    /// Constraint radius.
    pub big_r: f64,
}

impl DubinsParams {
    /// `r >= 2v/omega - R`: every heading can be turned toward the target in time.
    pub fn high_turn_rate() -> Self {
        Self { v: 0.5, omega: 0.833, r: 0.5, big_r: 1.0 }
    }

    pub fn low_turn_rate() -> Self {
        Self { v: 0.5, omega: 0.667, r: 0.4, big_r: 1.0 }
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        if !(self.v > 0.0 && self.omega > 0.0) {
            return Err("Dubins speed and turn rate must be positive".into());
        }
        if !(0.0 < self.r && self.r < self.big_r) {
            return Err(format!("Dubins radii need 0 < r < R, got r={} R={}", self.r, self.big_r));
        }
        Ok(())
    }

    pub(crate) fn control(&self, action: usize) -> f64 {
        [self.omega, 0.0, -self.omega][action]
    }

    pub(crate) fn margins(&self, s: &[f64]) -> Margins {
        let norm = s[0].hypot(s[1]);
        Margins { l: norm - self.r, g: norm - self.big_r }
    }
}

pub(crate) fn unicycle_derivative(v: f64, theta: f64, turn: f64, out: &mut [f64]) {
    out[0] = v * theta.cos();
    out[1] = v * theta.sin();
    out[2] = turn;
}

/// Exact constant-control unicycle flow over `dt`, used to check the integrator.
pub fn unicycle_arc(v: f64, turn: f64, s: [f64; 3], dt: f64) -> [f64; 3] {
    let [x, y, th] = s;
    if turn == 0.0 {
        return [x + v * dt * th.cos(), y + v * dt * th.sin(), th];
    }
    let th1 = th + turn * dt;
    [
        x + v / turn * (th1.sin() - th.sin()),
        y - v / turn * (th1.cos() - th.cos()),
        th1,
    ]
}
