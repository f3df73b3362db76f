//! Certification of learned policies by simulation: rollout values,
//! confusion matrices, shielding, exhaustive adversarial validation and
//! set distances between reach-avoid masks.

mod confusion;
mod exhaustive;
mod hausdorff;
mod ladder;
mod rollout;
mod shield;

use thiserror::Error;

pub use confusion::{confusion_matrix, ConfusionReport};
pub use exhaustive::{
    exhaustive_validate, worse_for_attacker, AttackerPolicy, ExhaustiveOptions, ExhaustiveReport, LeafSummary, NetworkAttacker,
    RoundReport,
};
pub use hausdorff::{directed_hausdorff, hausdorff_distance, SetDistance};
pub use ladder::{gamma_ladder_report, LadderReport, LadderStep};
pub use rollout::{classify, rollout_value, GreedyValuePolicy, NetworkPolicy, Outcome, Policy, RolloutRecord};
pub use shield::{shield_action, ShieldDecision};

use crate::env::EnvError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error("rollout horizon and interval counts must be at least 1")]
    InvalidHorizon,
    #[error("state set is empty")]
    EmptyStateSet,
    #[error("exhaustive validation needs the attack-defense environment")]
    NotAGame,
    #[error("mask has {got} cells, grid has {expected}")]
    MaskShape { expected: usize, got: usize },
    #[error("discount factors of a ladder must increase strictly")]
    LadderOrder,
    #[error(transparent)]
    Env(#[from] EnvError),
}
