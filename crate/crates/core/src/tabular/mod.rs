//! Grid discretisation, value iteration and tabular Q-learning.

mod grid;
mod model;
mod q_learning;
mod schedule;
mod value_grid;
mod value_iteration;

use thiserror::Error;

pub use grid::{Grid, Index, Located};
pub use model::{snap_transition, Lookup, Successor, TransitionTable};
pub use q_learning::{q_learning_on_model, tabular_q_learning, QLearningConfig, QLearningResult, StepSize};
pub use schedule::{Schedule, ScheduleMode};
pub use value_grid::{extract_ra_mask, QTable, ValueGrid};
pub use value_iteration::{finite_horizon, solve, value_iteration, ViOptions, ViReport};

use crate::bellman::BellmanError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TabularError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid has {grid} dimensions, environment state has {env}")]
    GridMismatch { grid: usize, env: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Bellman(#[from] BellmanError),
}
