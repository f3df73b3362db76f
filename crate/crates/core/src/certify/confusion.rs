use serde::{Deserialize, Serialize};

use super::rollout::{rollout_value, Outcome, Policy};
use super::CertifyError;
use crate::env::{EnvironmentSpec, State};

/// Predicted versus realized reach-avoid outcomes. Unfinished rollouts
/// count as failures.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub true_success: usize,
    pub false_success: usize,
    pub true_failure: usize,
    pub false_failure: usize,
    /// False successes over predicted successes; zero when nothing is predicted successful.
    pub fsr: f64,
    /// False failures over predicted failures; zero when nothing is predicted failing.
    pub ffr: f64,
}

impl ConfusionReport {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut r = Self::default();
        for (predicted, actual) in pairs {
            match (predicted, actual) {
                (true, true) => r.true_success += 1,
                (true, false) => r.false_success += 1,
                (false, false) => r.true_failure += 1,
                (false, true) => r.false_failure += 1,
            }
        }
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        r.fsr = ratio(r.false_success, r.true_success + r.false_success);
        r.ffr = ratio(r.false_failure, r.true_failure + r.false_failure);
        r
    }

    pub fn total(&self) -> usize {
        self.true_success + self.false_success + self.true_failure + self.false_failure
    }
}

/// Compare `value_fn(s) <= 0` with the outcome of rolling out `policy`.
pub fn confusion_matrix<V, P>(
    env: &EnvironmentSpec,
    value_fn: V,
    policy: &P,
    states: &[State],
    horizon: usize,
) -> Result<ConfusionReport, CertifyError>
where
    V: Fn(&State) -> f64,
    P: Policy + ?Sized,
{
    if states.is_empty() {
        return Err(CertifyError::EmptyStateSet);
    }
    let mut pairs = Vec::with_capacity(states.len());
    for s in states {
        let record = rollout_value(env, policy, s, horizon)?;
        pairs.push((value_fn(s) <= 0.0, record.outcome == Outcome::Success));
    }
    Ok(ConfusionReport::from_pairs(pairs))
}
