use serde::{Deserialize, Serialize};

use super::TabularError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleMode {
    /// `max{initial * decay^k, bound}`
    FloorDecay,
    /// `min{1 - initial * decay^k, bound}`
    OneMinusDecay,
}

/// Staged annealing: the value changes only at `stages` equally spaced
/// boundaries, with stage `k = floor(stages * x / T)` at step `x` of `T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub initial: f64,
    pub decay: f64,
    #[serde(default = "default_stages")]
    pub stages: u32,
    pub bound: f64,
    pub mode: ScheduleMode,
}

fn default_stages() -> u32 {
    20
}

impl Schedule {
    pub fn learning_rate() -> Self {
        Self { initial: 1e-3, decay: 0.8, stages: 20, bound: 1e-4, mode: ScheduleMode::FloorDecay }
    }

    pub fn exploration() -> Self {
        Self { initial: 0.95, decay: 0.6, stages: 20, bound: 0.05, mode: ScheduleMode::FloorDecay }
    }

    pub fn discount() -> Self {
        Self { initial: 0.2, decay: 0.5, stages: 20, bound: 0.999999, mode: ScheduleMode::OneMinusDecay }
    }

    pub fn constant(value: f64) -> Self {
        Self { initial: value, decay: 1.0, stages: 1, bound: value, mode: ScheduleMode::FloorDecay }
    }

    pub fn validate(&self) -> Result<(), TabularError> {
        let bad = |why: &str| Err(TabularError::InvalidSchedule(format!("{why}: {self:?}")));
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("decay must lie in (0, 1]");
        }
        if self.stages == 0 {
            return bad("stage count must be positive");
        }
        if !self.initial.is_finite() || !self.bound.is_finite() {
            return bad("values must be finite");
        }
        Ok(())
    }

    pub fn stage(&self, x: u64, total: u64) -> u32 {
        if total == 0 {
            return 0;
        }
        let x = x.min(total);
        ((self.stages as u128 * x as u128) / total as u128) as u32
    }

    pub fn value(&self, x: u64, total: u64) -> f64 {
        let scaled = self.initial * self.decay.powi(self.stage(x, total) as i32);
        match self.mode {
            ScheduleMode::FloorDecay => scaled.max(self.bound),
            ScheduleMode::OneMinusDecay => (1.0 - scaled).min(self.bound),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_values() {
        let lr = Schedule::learning_rate();
        assert_eq!(lr.value(0, 1000), 0.001);
        assert_eq!(lr.value(1000, 1000), 1e-4);
        assert_eq!(Schedule::exploration().value(0, 1000), 0.95);
        let gamma = Schedule::discount();
        assert_eq!(gamma.value(0, 1000), 0.8);
        assert_eq!(gamma.value(999, 1000), 0.999999);
        assert_eq!(gamma.value(1000, 1000), 0.999999);
    }

    #[test]
    fn piecewise_constant_blocks() {
        let eps = Schedule::exploration();
        assert_eq!(eps.value(0, 2000), eps.value(99, 2000));
        assert!(eps.value(100, 2000) < eps.value(99, 2000));
        assert_eq!(eps.stage(100, 2000), 1);
    }

    #[test]
    fn validation() {
        assert!(Schedule::discount().validate().is_ok());
        let mut s = Schedule::learning_rate();
        s.decay = 1.5;
        assert!(s.validate().is_err());
        s.decay = 0.5;
        s.stages = 0;
        assert!(s.validate().is_err());
    }
}
