use serde::{Deserialize, Serialize};

use super::rollout::{rollout_value, Outcome, Policy};
use super::CertifyError;
use crate::env::{EnvironmentSpec, State};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShieldDecision {
    pub action: usize,
    /// The candidate was replaced by the fallback action.
    pub intervened: bool,
    /// Neither the candidate nor the fallback leads to a successful rollout.
    pub guarantee_lost: bool,
}

/// Accept `candidate` if applying it and then following `fallback` for
/// `horizon` steps reaches the target safely; otherwise use the fallback.
pub fn shield_action<P: Policy + ?Sized>(
    env: &EnvironmentSpec,
    s: &State,
    candidate: usize,
    fallback: &P,
    horizon: usize,
) -> Result<ShieldDecision, CertifyError> {
    let here = env.margins(s)?;
    if candidate >= env.n_actions() {
        return Err(CertifyError::Env(crate::env::EnvError::ActionOutOfRange {
            env: env.name.clone(),
            index: candidate,
            count: env.n_actions(),
        }));
    }
    if !here.in_failure() {
        if here.in_target() {
            return Ok(ShieldDecision { action: candidate, intervened: false, guarantee_lost: false });
        }
        let next = env.advance(s, candidate);
        if rollout_value(env, fallback, &next, horizon)?.outcome == Outcome::Success {
            return Ok(ShieldDecision { action: candidate, intervened: false, guarantee_lost: false });
        }
    }
    let action = fallback.action(s);
    let lost = rollout_value(env, fallback, s, horizon)?.outcome != Outcome::Success;
    Ok(ShieldDecision { action, intervened: action != candidate, guarantee_lost: lost })
}
