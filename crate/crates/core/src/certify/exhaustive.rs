use serde::{Deserialize, Serialize};

use super::rollout::{Outcome, RolloutRecord};
use super::CertifyError;
use crate::bellman;
use crate::env::{AttackDefenseParams, EnvironmentSpec, State, System};
use crate::neural::Mlp;

/// Attacker feedback returning an attacker action index.
pub trait AttackerPolicy {
    fn attacker_action(&self, s: &State) -> usize;
}

impl<F: Fn(&State) -> usize> AttackerPolicy for F {
    fn attacker_action(&self, s: &State) -> usize {
        self(s)
    }
}

/// Attacker half of the saddle choice of a joint-output network.
pub struct NetworkAttacker<'a> {
    pub net: &'a Mlp,
    pub n_defender: usize,
}

impl AttackerPolicy for NetworkAttacker<'_> {
    fn attacker_action(&self, s: &State) -> usize {
        bellman::minimax_action(&self.net.forward(s), self.n_defender).0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExhaustiveOptions {
    pub intervals: usize,
    pub steps_per_interval: usize,
    pub rounds: usize,
    /// Keep a summary of every enumerated defender plan.
    #[serde(default)]
    pub keep_leaves: bool,
}

impl Default for ExhaustiveOptions {
    fn default() -> Self {
        Self { intervals: 10, steps_per_interval: 5, rounds: 2, keep_leaves: false }
    }
}

/// Outcome of one enumerated defender plan. Plans that share a prefix
/// ending in failure or success have the same record; `multiplicity`
/// counts them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafSummary {
    pub plan_prefix: Vec<usize>,
    pub outcome: Outcome,
    pub payoff: f64,
    pub multiplicity: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    /// Number of defender plans covered, `|U_D|^intervals`.
    pub enumerated: u64,
    pub simulated_steps: u64,
    pub worst_plan: Vec<usize>,
    pub worst_outcome: Outcome,
    pub worst_payoff: f64,
    pub leaves: Vec<LeafSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveReport {
    /// Attacker-pessimal trajectory, concatenated over rounds.
    pub worst: RolloutRecord,
    pub rounds: Vec<RoundReport>,
}

/// `a` is strictly worse for the attacker than `b`: a lower category
/// (failure < unfinished < success), or the same category with a larger payoff.
pub fn worse_for_attacker(a: (Outcome, f64), b: (Outcome, f64)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 > b.1)
}

struct Search<'a, A: ?Sized> {
    env: &'a EnvironmentSpec,
    game: &'a AttackDefenseParams,
    attacker: &'a A,
    opts: ExhaustiveOptions,
    record: RolloutRecord,
    plan: Vec<usize>,
    best: Option<(Outcome, f64, RolloutRecord, Vec<usize>)>,
    enumerated: u64,
    steps: u64,
    leaves: Vec<LeafSummary>,
}

impl<A: AttackerPolicy + ?Sized> Search<'_, A> {
    fn leaf(&mut self, outcome: Outcome, multiplicity: u64) {
        let payoff = bellman::payoff(&self.record.l, &self.record.g).expect("trace is nonempty");
        self.enumerated += multiplicity;
        if self.opts.keep_leaves {
            self.leaves.push(LeafSummary { plan_prefix: self.plan.clone(), outcome, payoff, multiplicity });
        }
        let replace = match &self.best {
            None => true,
            Some((o, p, _, _)) => worse_for_attacker((outcome, payoff), (*o, *p)),
        };
        if replace {
            let mut record = self.record.clone();
            record.outcome = outcome;
            record.payoff = payoff;
            self.best = Some((outcome, payoff, record, self.plan.clone()));
        }
    }

    fn visit(&mut self, depth: usize) {
        if depth == self.opts.intervals {
            self.leaf(Outcome::Unfinished, 1);
            return;
        }
        let n_def = self.game.n_defender();
        let base = self.record.steps;
        for d in 0..n_def {
            self.plan.push(d);
            let mut event = None;
            for _ in 0..self.opts.steps_per_interval {
                let current = self.record.final_state();
                let a = self.attacker.attacker_action(current);
                let joint = self.game.joint_action(a, d);
                let next = self.env.advance(current, joint);
                self.steps += 1;
                event = self.record.push(self.env, joint, next);
                if event.is_some() {
                    break;
                }
            }
            match event {
                Some(outcome) => {
                    let remaining = (self.opts.intervals - depth - 1) as u32;
                    self.leaf(outcome, (n_def as u64).pow(remaining));
                }
                None => self.visit(depth + 1),
            }
            self.record.truncate(base);
            self.plan.pop();
        }
    }
}

fn one_round<A: AttackerPolicy + ?Sized>(
    env: &EnvironmentSpec,
    game: &AttackDefenseParams,
    attacker: &A,
    s: &State,
    opts: ExhaustiveOptions,
) -> (RolloutRecord, RoundReport) {
    let (record, event) = RolloutRecord::start(env, s.clone());
    let mut search = Search { env, game, attacker, opts, record, plan: Vec::new(), best: None, enumerated: 0, steps: 0, leaves: Vec::new() };
    match event {
        Some(outcome) => search.leaf(outcome, (game.n_defender() as u64).pow(opts.intervals as u32)),
        None => search.visit(0),
    }
    let (outcome, payoff, worst, plan) = search.best.expect("at least one plan is enumerated");
    let report = RoundReport {
        enumerated: search.enumerated,
        simulated_steps: search.steps,
        worst_plan: plan,
        worst_outcome: outcome,
        worst_payoff: payoff,
        leaves: search.leaves,
    };
    (worst, report)
}

/// Enumerate every defender plan that is constant on each of `intervals`
/// blocks of `steps_per_interval` steps while the attacker follows its
/// policy; return the attacker-pessimal record. An unfinished worst record
/// starts another round from its final state, up to `rounds` rounds.
pub fn exhaustive_validate<A: AttackerPolicy + ?Sized>(
    env: &EnvironmentSpec,
    attacker: &A,
    s: &State,
    opts: ExhaustiveOptions,
) -> Result<ExhaustiveReport, CertifyError> {
    let System::AttackDefense(game) = &env.system else {
        return Err(CertifyError::NotAGame);
    };
    if opts.intervals == 0 || opts.steps_per_interval == 0 || opts.rounds == 0 {
        return Err(CertifyError::InvalidHorizon);
    }
    env.margins(s)?;
    let (mut worst, first) = one_round(env, game, attacker, s, opts);
    let mut rounds = vec![first];
    while worst.outcome == Outcome::Unfinished && rounds.len() < opts.rounds {
        let (next, report) = one_round(env, game, attacker, worst.final_state(), opts);
        worst.states.extend(next.states.into_iter().skip(1));
        worst.actions.extend(next.actions);
        worst.l.extend(next.l.into_iter().skip(1));
        worst.g.extend(next.g.into_iter().skip(1));
        worst.steps += next.steps;
        worst.finish(next.outcome);
        rounds.push(report);
    }
    Ok(ExhaustiveReport { worst, rounds })
}
