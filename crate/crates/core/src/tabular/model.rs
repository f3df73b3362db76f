use rayon::prelude::*;
use smallvec::SmallVec;

use super::grid::{Grid, Located};
use super::TabularError;
use crate::bellman;
use crate::env::EnvironmentSpec;

/// How a continuous successor is mapped back onto the grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lookup {
    /// Nearest cell: a deterministic finite transition function.
    #[default]
    Snap,
    /// Multilinear interpolation over the surrounding cell centers.
    Interp,
}

/// Where one action leads from one cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Successor {
    /// Weighted grid cells; snap lookups have a single cell with weight 1.
    Cells(SmallVec<[(u32, f64); 8]>),
    /// The successor left the grid; its value is frozen to `max{l, g}` there.
    Exit(f64),
}

/// Finite deterministic model: margins per state and a successor per
/// `(state, action)`. Built from an environment and grid, or directly.
#[derive(Clone, Debug)]
pub struct TransitionTable {
    n_states: usize,
    n_actions: usize,
    l: Vec<f64>,
    g: Vec<f64>,
    offsets: Vec<u32>,
    cells: Vec<u32>,
    weights: Vec<f64>,
    /// `Some(v)` for successors that left the grid.
    exits: Vec<Option<f64>>,
}

/// Snap successor of a cell center under one action.
pub fn snap_transition(grid: &Grid, env: &EnvironmentSpec, cell: usize, action: usize) -> Located {
    let next = env.advance(&grid.center(cell), action);
    grid.locate(&next)
}

impl TransitionTable {
    pub fn build(env: &EnvironmentSpec, grid: &Grid, lookup: Lookup) -> Result<Self, TabularError> {
        if grid.dim() != env.state_dim() {
            return Err(TabularError::GridMismatch { grid: grid.dim(), env: env.state_dim() });
        }
        let n_actions = env.n_actions();
        let rows: Vec<(f64, f64, Vec<Successor>)> = (0..grid.n_cells())
            .into_par_iter()
            .map(|cell| {
                let center = grid.center(cell);
                let m = env.margins_of(&center);
                let succ = (0..n_actions)
                    .map(|a| {
                        let next = env.advance(&center, a);
                        let (stencil, out) = match lookup {
                            Lookup::Snap => {
                                let loc = grid.locate(&next);
                                (SmallVec::from_slice(&[(loc.cell, 1.0)]), loc.out_of_domain)
                            }
                            Lookup::Interp => grid.stencil(&next),
                        };
                        if out {
                            Successor::Exit(env.margins_of(&next).one_step())
                        } else {
                            Successor::Cells(stencil.into_iter().map(|(c, w)| (c as u32, w)).collect())
                        }
                    })
                    .collect();
                (m.l, m.g, succ)
            })
            .collect();
        let mut l = Vec::with_capacity(rows.len());
        let mut g = Vec::with_capacity(rows.len());
        let mut successors = Vec::with_capacity(rows.len() * n_actions);
        for (li, gi, succ) in rows {
            l.push(li);
            g.push(gi);
            successors.extend(succ);
        }
        Self::from_parts(l, g, n_actions, successors)
    }

    /// Assemble a model from per-state margins and `n_states * n_actions`
    /// successors in state-major order.
    pub fn from_parts(l: Vec<f64>, g: Vec<f64>, n_actions: usize, successors: Vec<Successor>) -> Result<Self, TabularError> {
        let n_states = l.len();
        if g.len() != n_states || successors.len() != n_states * n_actions || n_actions == 0 {
            return Err(TabularError::InvalidModel("margin and successor counts disagree".into()));
        }
        let mut offsets = Vec::with_capacity(successors.len() + 1);
        let mut cells = Vec::new();
        let mut weights = Vec::new();
        let mut exits = Vec::with_capacity(successors.len());
        offsets.push(0u32);
        for succ in successors {
            match succ {
                Successor::Cells(stencil) => {
                    if stencil.is_empty() || stencil.iter().any(|(c, _)| *c as usize >= n_states) {
                        return Err(TabularError::InvalidModel("successor cell out of range".into()));
                    }
                    for (c, w) in stencil {
                        cells.push(c);
                        weights.push(w);
                    }
                    exits.push(None);
                }
                Successor::Exit(v) => exits.push(Some(v)),
            }
            let end = u32::try_from(cells.len())
                .map_err(|_| TabularError::InvalidModel("too many stencil entries".into()))?;
            offsets.push(end);
        }
        Ok(Self { n_states, n_actions, l, g, offsets, cells, weights, exits })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn l(&self) -> &[f64] {
        &self.l
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn successor(&self, state: usize, action: usize) -> Successor {
        let k = state * self.n_actions + action;
        match self.exits[k] {
            Some(v) => Successor::Exit(v),
            None => {
                let (a, b) = (self.offsets[k] as usize, self.offsets[k + 1] as usize);
                Successor::Cells(self.cells[a..b].iter().copied().zip(self.weights[a..b].iter().copied()).collect())
            }
        }
    }

    /// Value of taking `action` in `state` under the table `values`.
    #[inline]
    pub fn successor_value(&self, values: &[f64], state: usize, action: usize) -> f64 {
        let k = state * self.n_actions + action;
        if let Some(v) = self.exits[k] {
            return v;
        }
        let (a, b) = (self.offsets[k] as usize, self.offsets[k + 1] as usize);
        let mut sum = 0.0;
        for i in a..b {
            sum += self.weights[i] * values[self.cells[i] as usize];
        }
        sum
    }

    pub fn min_successor_value(&self, values: &[f64], state: usize) -> f64 {
        (0..self.n_actions)
            .map(|a| self.successor_value(values, state, a))
            .fold(f64::INFINITY, f64::min)
    }

    /// Greedy action: lowest-index argmin of successor values.
    pub fn greedy_action(&self, values: &[f64], state: usize) -> usize {
        let mut best = 0;
        let mut best_value = self.successor_value(values, state, 0);
        for a in 1..self.n_actions {
            let v = self.successor_value(values, state, a);
            if v < best_value {
                best = a;
                best_value = v;
            }
        }
        best
    }

    /// `max{l, g}` per state, the default initial table.
    pub fn one_step_values(&self) -> Vec<f64> {
        self.l.iter().zip(&self.g).map(|(l, g)| l.max(*g)).collect()
    }

    /// One Jacobi sweep of the discounted backup: reads `values`, writes `out`.
    pub fn backup_into(&self, values: &[f64], gamma: f64, out: &mut [f64]) {
        out.par_iter_mut().enumerate().with_min_len(1024).for_each(|(s, o)| {
            *o = bellman::drabe(self.l[s], self.g[s], self.min_successor_value(values, s), gamma);
        });
    }

    pub fn backup(&self, values: &[f64], gamma: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_states];
        self.backup_into(values, gamma, &mut out);
        out
    }
}
