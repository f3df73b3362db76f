use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::model::{Lookup, TransitionTable};
use super::value_grid::ValueGrid;
use super::TabularError;
use crate::bellman::Discount;
use crate::env::EnvironmentSpec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViOptions {
    pub gamma: f64,
    pub tol: f64,
    pub max_sweeps: usize,
    #[serde(default)]
    pub lookup: Lookup,
}

impl Default for ViOptions {
    fn default() -> Self {
        Self { gamma: 0.9999, tol: 1e-6, max_sweeps: 200_000, lookup: Lookup::Snap }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViReport {
    pub sweeps: usize,
    /// Sup-norm change of each sweep.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

impl ViReport {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// Jacobi iteration of the discounted backup from `init` (default `max{l, g}`)
/// until the sup-norm change is at most `tol`. Hitting `max_sweeps` is
/// reported through `converged == false`, not as an error.
pub fn solve(
    model: &TransitionTable,
    gamma: f64,
    tol: f64,
    max_sweeps: usize,
    init: Option<Vec<f64>>,
) -> Result<(Vec<f64>, ViReport), TabularError> {
    let gamma = Discount::contractive(gamma)?.value();
    if !(tol > 0.0) {
        return Err(TabularError::InvalidOptions(format!("tolerance must be positive, got {tol}")));
    }
    let mut values = match init {
        Some(v) if v.len() != model.n_states() => {
            return Err(TabularError::ShapeMismatch { expected: model.n_states(), got: v.len() })
        }
        Some(v) => v,
        None => model.one_step_values(),
    };
    let mut next = vec![0.0; values.len()];
    let mut residuals = Vec::new();
    let mut converged = false;
    while residuals.len() < max_sweeps {
        model.backup_into(&values, gamma, &mut next);
        let residual = values.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut values, &mut next);
        residuals.push(residual);
        if residual <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("value iteration stopped after {max_sweeps} sweeps, residual {:e}", residuals.last().unwrap_or(&f64::NAN));
    }
    Ok((values, ViReport { sweeps: residuals.len(), residuals, converged }))
}

pub fn value_iteration(env: &EnvironmentSpec, grid: &Grid, opts: &ViOptions) -> Result<(ValueGrid, ViReport), TabularError> {
    let model = TransitionTable::build(env, grid, opts.lookup)?;
    let (values, report) = solve(&model, opts.gamma, opts.tol, opts.max_sweeps, None)?;
    Ok((ValueGrid::new(grid.clone(), values)?, report))
}

/// `horizon` undiscounted sweeps from `max{l, g}`: the optimal payoff over
/// traces of `horizon + 1` states.
pub fn finite_horizon(model: &TransitionTable, horizon: usize) -> Vec<f64> {
    let mut values = model.one_step_values();
    for _ in 0..horizon {
        values = model.backup(&values, 1.0);
    }
    values
}

#[cfg(test)]
mod tests {
    use super::*;
    use super::super::model::Successor;
    use smallvec::smallvec;

    fn particle_model(nx: usize, ny: usize) -> TransitionTable {
        let env = EnvironmentSpec::particle();
        let grid = Grid::for_env(&env, vec![nx, ny]).unwrap();
        TransitionTable::build(&env, &grid, Lookup::Snap).unwrap()
    }

    #[test]
    fn gamma_zero_converges_in_one_sweep() {
        let model = particle_model(21, 61);
        let (values, report) = solve(&model, 0.0, 1e-12, 10, None).unwrap();
        assert_eq!(values, model.one_step_values());
        assert_eq!(report.sweeps, 1);
        assert!(report.converged);
    }

    #[test]
    fn residuals_shrink_at_contraction_rate() {
        let model = particle_model(41, 121);
        let gamma = 0.9;
        let init: Vec<f64> = (0..model.n_states()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let (_, report) = solve(&model, gamma, 1e-10, 300, Some(init)).unwrap();
        let r0 = report.residuals[0];
        for (k, r) in report.residuals.iter().enumerate() {
            assert!(*r <= gamma.powi(k as i32) * r0 + 1e-12, "sweep {k}: {r}");
        }
        for w in report.residuals.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn single_state_fixed_point() {
        // self loop: V = gamma max{g, min{l, V}} + (1 - gamma) max{l, g}
        let model = TransitionTable::from_parts(vec![0.5], vec![-1.0], 1, vec![Successor::Cells(smallvec![(0, 1.0)])]).unwrap();
        let (values, report) = solve(&model, 0.9, 1e-12, 1000, Some(vec![-3.0])).unwrap();
        assert!(report.converged);
        assert!((values[0] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let model = particle_model(21, 61);
        let init = vec![-50.0; model.n_states()];
        let (_, report) = solve(&model, 0.99, 1e-12, 2, Some(init)).unwrap();
        assert!(!report.converged);
        assert_eq!(report.sweeps, 2);
    }

    #[test]
    fn rejects_bad_options() {
        let model = particle_model(21, 61);
        assert!(solve(&model, 1.0, 1e-6, 10, None).is_err());
        assert!(solve(&model, 0.5, 0.0, 10, None).is_err());
        assert!(solve(&model, 0.5, 1e-6, 10, Some(vec![0.0; 3])).is_err());
    }
}
