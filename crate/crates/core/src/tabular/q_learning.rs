use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::model::{Lookup, TransitionTable};
use super::schedule::Schedule;
use super::value_grid::QTable;
use super::TabularError;
use crate::bellman;
use crate::env::EnvironmentSpec;
use crate::rng::{stream, Stream};

/// Step size of the temporal-difference update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepSize {
    /// `1 / (1 + N(s, u))^exponent` with `N` the prior visit count of the pair
    /// since the discount last changed.
    VisitCount { exponent: f64 },
    /// Global staged schedule over episodes.
    Scheduled { schedule: Schedule },
}

impl Default for StepSize {
    fn default() -> Self {
        StepSize::VisitCount { exponent: 0.51 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QLearningConfig {
    pub episodes: u64,
    /// Maximum steps per episode.
    pub horizon: usize,
    pub gamma: Schedule,
    pub epsilon: Schedule,
    #[serde(default)]
    pub step_size: StepSize,
    pub seed: u64,
}

impl QLearningConfig {
    pub fn new(episodes: u64, horizon: usize, seed: u64) -> Self {
        Self {
            episodes,
            horizon,
            gamma: Schedule::discount(),
            epsilon: Schedule::exploration(),
            step_size: StepSize::default(),
            seed,
        }
    }

    fn validate(&self) -> Result<(), TabularError> {
        self.gamma.validate()?;
        self.epsilon.validate()?;
        if let StepSize::Scheduled { schedule } = &self.step_size {
            schedule.validate()?;
        }
        if let StepSize::VisitCount { exponent } = self.step_size {
            if !(exponent > 0.5 && exponent <= 1.0) {
                return Err(TabularError::InvalidOptions(format!(
                    "visit-count exponent {exponent} violates the step-size sum conditions (needs 0.5 < p <= 1)"
                )));
            }
        }
        if self.episodes == 0 || self.horizon == 0 {
            return Err(TabularError::InvalidOptions("episodes and horizon must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QLearningResult {
    pub table: QTable,
    /// Update count per `(cell, action)`, cell-major.
    pub visits: Vec<u64>,
    /// Discount in force during the last episode.
    pub final_gamma: f64,
}

impl QLearningResult {
    pub fn cell_visits(&self) -> Vec<u64> {
        self.visits.chunks(self.table.n_actions).map(|c| c.iter().sum()).collect()
    }
}

/// Epsilon-greedy Q-learning on a finite model with uniformly random resets.
///
/// Episodes end when the successor leaves the grid or after `horizon` steps.
/// Returns the Q-values and per-pair visit counts.
pub fn q_learning_on_model(model: &TransitionTable, config: &QLearningConfig) -> Result<(Vec<f64>, Vec<u64>, f64), TabularError> {
    config.validate()?;
    let n_actions = model.n_actions();
    let init = model.one_step_values();
    let mut q: Vec<f64> = init.iter().flat_map(|v| std::iter::repeat_n(*v, n_actions)).collect();
    let mut visits = vec![0u64; q.len()];
    let mut stage_visits = vec![0u64; q.len()];
    let mut stage = config.gamma.stage(0, config.episodes);
    let mut resets = stream(config.seed, Stream::Reset);
    let mut explore = stream(config.seed, Stream::Exploration);
    let mut gamma = config.gamma.value(0, config.episodes);
    for episode in 0..config.episodes {
        gamma = config.gamma.value(episode, config.episodes);
        let next_stage = config.gamma.stage(episode, config.episodes);
        if next_stage != stage {
            stage_visits.iter_mut().for_each(|n| *n = 0);
        }
        stage = next_stage;
        let epsilon = config.epsilon.value(episode, config.episodes);
        let scheduled_rate = match config.step_size {
            StepSize::Scheduled { schedule } => Some(schedule.value(episode, config.episodes)),
            StepSize::VisitCount { .. } => None,
        };
        let mut s = resets.random_range(0..model.n_states());
        for _ in 0..config.horizon {
            let a = if explore.random::<f64>() < epsilon {
                explore.random_range(0..n_actions)
            } else {
                bellman::argmin(&q[s * n_actions..(s + 1) * n_actions])
            };
            let (next_value, next_state) = match model.successor(s, a) {
                super::model::Successor::Exit(v) => (v, None),
                super::model::Successor::Cells(cells) => {
                    let (c, _) = cells[0];
                    let c = c as usize;
                    (bellman::min_value(&q[c * n_actions..(c + 1) * n_actions]), Some(c))
                }
            };
            let k = s * n_actions + a;
            let alpha = match (scheduled_rate, config.step_size) {
                (Some(rate), _) => rate,
                (None, StepSize::VisitCount { exponent }) => 1.0 / (1.0 + stage_visits[k] as f64).powf(exponent),
                (None, StepSize::Scheduled { .. }) => unreachable!(),
            };
            let target = bellman::drabe(model.l()[s], model.g()[s], next_value, gamma);
            q[k] += alpha * (target - q[k]);
            visits[k] += 1;
            stage_visits[k] += 1;
            match next_state {
                Some(c) => s = c,
                None => break,
            }
        }
    }
    Ok((q, visits, gamma))
}

/// Tabular Q-learning on the snap model of `env` over `grid`.
pub fn tabular_q_learning(env: &EnvironmentSpec, grid: &Grid, config: &QLearningConfig) -> Result<QLearningResult, TabularError> {
    let model = TransitionTable::build(env, grid, Lookup::Snap)?;
    let (q, visits, final_gamma) = q_learning_on_model(&model, config)?;
    let table = QTable::new(grid.clone(), model.n_actions(), q)?;
    let under = visits.iter().filter(|v| **v == 0).count();
    if under > 0 {
        log::info!("{under} state-action pairs never visited");
    }
    Ok(QLearningResult { table, visits, final_gamma })
}
