use serde::{Deserialize, Serialize};

use super::CertifyError;
use crate::bellman;
use crate::env::{EnvironmentSpec, State};
use crate::neural::{greedy_action, Mlp, Objective};
use crate::tabular::{Lookup, ValueGrid};

/// Deterministic feedback policy returning an action index.
pub trait Policy {
    fn action(&self, s: &State) -> usize;
}

impl<F: Fn(&State) -> usize> Policy for F {
    fn action(&self, s: &State) -> usize {
        self(s)
    }
}

/// One-step lookahead on a value grid: argmin over actions of the value at
/// the successor. Successors outside the domain are scored by `max{l, g}`.
pub struct GreedyValuePolicy<'a> {
    pub env: &'a EnvironmentSpec,
    pub values: &'a ValueGrid,
    pub lookup: Lookup,
}

impl GreedyValuePolicy<'_> {
    pub fn successor_value(&self, next: &State) -> f64 {
        let inside = next
            .iter()
            .zip(self.values.grid.lower().iter().zip(self.values.grid.upper()))
            .zip(self.values.grid.periodic())
            .all(|((x, (lo, hi)), periodic)| *periodic || (*x >= *lo && *x <= *hi));
        if inside {
            self.values.value_at(next, self.lookup)
        } else {
            self.env.margins_of(next).one_step()
        }
    }
}

impl Policy for GreedyValuePolicy<'_> {
    fn action(&self, s: &State) -> usize {
        let scores: Vec<f64> = (0..self.env.n_actions()).map(|a| self.successor_value(&self.env.advance(s, a))).collect();
        bellman::argmin(&scores)
    }
}

/// Greedy policy of a Q-network.
pub struct NetworkPolicy<'a> {
    pub env: &'a EnvironmentSpec,
    pub net: &'a Mlp,
    pub objective: Objective,
}

impl Policy for NetworkPolicy<'_> {
    fn action(&self, s: &State) -> usize {
        greedy_action(self.env, self.objective, &self.net.forward(s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Failure,
    Unfinished,
    Success,
}

/// A simulated trajectory with its margins and realized payoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub states: Vec<State>,
    pub actions: Vec<usize>,
    pub l: Vec<f64>,
    pub g: Vec<f64>,
    pub payoff: f64,
    pub outcome: Outcome,
    pub steps: usize,
}

/// Event at one visited state: failure is checked before the target.
pub fn classify(l: f64, g: f64) -> Option<Outcome> {
    if g > 0.0 {
        Some(Outcome::Failure)
    } else if l <= 0.0 {
        Some(Outcome::Success)
    } else {
        None
    }
}

impl RolloutRecord {
    pub(crate) fn start(env: &EnvironmentSpec, s: State) -> (Self, Option<Outcome>) {
        let m = env.margins_of(&s);
        let record = Self {
            states: vec![s],
            actions: Vec::new(),
            l: vec![m.l],
            g: vec![m.g],
            payoff: m.one_step(),
            outcome: Outcome::Unfinished,
            steps: 0,
        };
        (record, classify(m.l, m.g))
    }

    /// Append one step and report any event at the new state.
    pub(crate) fn push(&mut self, env: &EnvironmentSpec, action: usize, next: State) -> Option<Outcome> {
        let m = env.margins_of(&next);
        self.actions.push(action);
        self.states.push(next);
        self.l.push(m.l);
        self.g.push(m.g);
        self.steps += 1;
        classify(m.l, m.g)
    }

    pub(crate) fn truncate(&mut self, steps: usize) {
        self.states.truncate(steps + 1);
        self.actions.truncate(steps);
        self.l.truncate(steps + 1);
        self.g.truncate(steps + 1);
        self.steps = steps;
    }

    pub(crate) fn finish(&mut self, outcome: Outcome) {
        self.outcome = outcome;
        self.payoff = bellman::payoff(&self.l, &self.g).expect("trace is nonempty");
    }

    pub fn final_state(&self) -> &State {
        self.states.last().expect("trace is nonempty")
    }
}

fn check_state(env: &EnvironmentSpec, s: &State) -> Result<(), CertifyError> {
    if s.dim() != env.state_dim() {
        return Err(CertifyError::Env(crate::env::EnvError::DimensionMismatch {
            env: env.name.clone(),
            expected: env.state_dim(),
            got: s.dim(),
        }));
    }
    if !s.is_finite() {
        return Err(CertifyError::Env(crate::env::EnvError::NonFinite(s.to_vec())));
    }
    Ok(())
}

/// Simulate `policy` from `s` for at most `horizon` steps, stopping at the
/// first failure or target visit.
pub fn rollout_value<P: Policy + ?Sized>(env: &EnvironmentSpec, policy: &P, s: &State, horizon: usize) -> Result<RolloutRecord, CertifyError> {
    if horizon == 0 {
        return Err(CertifyError::InvalidHorizon);
    }
    check_state(env, s)?;
    let (mut record, mut event) = RolloutRecord::start(env, s.clone());
    while event.is_none() && record.steps < horizon {
        let current = record.final_state();
        let action = policy.action(current);
        if action >= env.n_actions() {
            return Err(CertifyError::Env(crate::env::EnvError::ActionOutOfRange {
                env: env.name.clone(),
                index: action,
                count: env.n_actions(),
            }));
        }
        let next = env.advance(current, action);
        event = record.push(env, action, next);
    }
    record.finish(event.unwrap_or(Outcome::Unfinished));
    Ok(record)
}
