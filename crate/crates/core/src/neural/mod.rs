//! Function approximation: a small tanh network, Adam, replay and the
//! double-DQN training loop.

mod mlp;
mod optim;
mod pretrain;
mod replay;
mod train;

use thiserror::Error;

pub use mlp::{ForwardCache, Mlp};
pub use optim::{soft_update, Adam, OptimizerKind};
pub use pretrain::{margin_pretrain, MarginTarget, PretrainConfig, PretrainReport};
pub use replay::{ReplayBuffer, Transition};
pub use train::{ddqn_train, greedy_action, greedy_success_ratio, greedy_value, InitMode, Metrics, Objective, Termination, TrainConfig, TrainOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("invalid network architecture {0}")]
    InvalidArchitecture(String),
    #[error("expected {expected} entries, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("network parameters are not finite")]
    NonFinite,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged at update {update}: loss {loss:e}")]
    Diverged { update: u64, loss: f64 },
}
