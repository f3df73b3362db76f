use serde::{Deserialize, Serialize};

use super::Margins;

/// Two identical Dubins cars: the attacker tries to reach the inner disc
/// without leaving the outer disc or being captured by the defender.
///
/// State `[xa, ya, tha, xd, yd, thd]`. Joint action `a * n_defender + d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackDefenseParams {
    pub v: f64,
    pub attacker_turn_rates: Vec<f64>,
    pub defender_turn_rates: Vec<f64>,
    pub r: f64,
    pub big_r: f64,
    /// Capture radius.
    pub beta: f64,
    /// Restrict resets to attackers in the ring `r <= |p_A| <= R` and
    /// defenders inside the constraint disc.
    #[serde(default = "default_true")]
    pub ring_sampling: bool,
}

fn default_true() -> bool {
    true
}

impl Default for AttackDefenseParams {
    fn default() -> Self {
        let omega = 3.0;
        Self {
            v: 0.75,
            attacker_turn_rates: vec![omega, 0.0, -omega],
            defender_turn_rates: vec![omega, 0.0, -omega],
            r: 0.5,
            big_r: 1.0,
            beta: 0.25,
            ring_sampling: true,
        }
    }
}

impl AttackDefenseParams {
    pub fn n_attacker(&self) -> usize {
        self.attacker_turn_rates.len()
    }

    pub fn n_defender(&self) -> usize {
        self.defender_turn_rates.len()
    }

    pub fn joint_action(&self, attacker: usize, defender: usize) -> usize {
        attacker * self.n_defender() + defender
    }

    pub fn split_action(&self, joint: usize) -> (usize, usize) {
        (joint / self.n_defender(), joint % self.n_defender())
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        if self.v <= 0.0 {
            return Err("attack-defense speed must be positive".into());
        }
        if self.attacker_turn_rates.is_empty() || self.defender_turn_rates.is_empty() {
            return Err("attack-defense action sets must be nonempty".into());
        }
        if !(0.0 < self.r && self.r < self.big_r) {
            return Err(format!("attack-defense radii need 0 < r < R, got r={} R={}", self.r, self.big_r));
        }
        if self.beta <= 0.0 {
            return Err("capture radius beta must be positive".into());
        }
        Ok(())
    }

    pub(crate) fn margins(&self, s: &[f64]) -> Margins {
        let attacker_norm = s[0].hypot(s[1]);
        let separation = (s[0] - s[3]).hypot(s[1] - s[4]);
        Margins {
            l: attacker_norm - self.r,
            g: (attacker_norm - self.big_r).max(self.beta - separation),
        }
    }
}
