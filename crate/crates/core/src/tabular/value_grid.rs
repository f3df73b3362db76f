use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::model::Lookup;
use super::TabularError;

/// State values on a grid, one per cell in flat order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueGrid {
    pub grid: Grid,
    pub values: Vec<f64>,
}

/// Zero sub-level set: `true` where the value is at most zero.
pub fn extract_ra_mask(values: &[f64]) -> Vec<bool> {
    values.iter().map(|v| *v <= 0.0).collect()
}

impl ValueGrid {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, TabularError> {
        if values.len() != grid.n_cells() {
            return Err(TabularError::ShapeMismatch { expected: grid.n_cells(), got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn ra_mask(&self) -> Vec<bool> {
        extract_ra_mask(&self.values)
    }

    /// Value at an arbitrary point; out-of-domain points are clamped.
    pub fn value_at(&self, x: &[f64], lookup: Lookup) -> f64 {
        match lookup {
            Lookup::Snap => self.values[self.grid.nearest_cell(x)],
            Lookup::Interp => self.grid.stencil(x).0.iter().map(|(c, w)| w * self.values[*c]).sum(),
        }
    }
}

/// State-action values on a grid, `n_actions` per cell, cell-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub grid: Grid,
    pub n_actions: usize,
    pub q: Vec<f64>,
}

impl QTable {
    pub fn new(grid: Grid, n_actions: usize, q: Vec<f64>) -> Result<Self, TabularError> {
        let expected = grid.n_cells() * n_actions;
        if q.len() != expected || n_actions == 0 {
            return Err(TabularError::ShapeMismatch { expected, got: q.len() });
        }
        Ok(Self { grid, n_actions, q })
    }

    pub fn row(&self, cell: usize) -> &[f64] {
        &self.q[cell * self.n_actions..(cell + 1) * self.n_actions]
    }

    pub fn greedy_action(&self, cell: usize) -> usize {
        crate::bellman::argmin(self.row(cell))
    }

    /// `min_u Q(s, u)` per cell.
    pub fn greedy_values(&self) -> ValueGrid {
        let values = (0..self.grid.n_cells()).map(|c| crate::bellman::min_value(self.row(c))).collect();
        ValueGrid { grid: self.grid.clone(), values }
    }
}
