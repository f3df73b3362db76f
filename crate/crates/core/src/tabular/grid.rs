use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::TabularError;
use crate::env::EnvironmentSpec;

pub type Index = SmallVec<[usize; 6]>;

/// Uniform cell-centered rectilinear grid. Cell `i` along a dimension with
/// bounds `[lo, hi]` and `n` cells has center `lo + (i + 1/2) (hi - lo) / n`.
///
/// Flat indices are row-major: the first dimension varies slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
    periodic: Vec<bool>,
}

/// Result of mapping a continuous point onto the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Located {
    pub cell: usize,
    /// Some non-periodic coordinate lay outside its bounds and was clamped.
    pub out_of_domain: bool,
}

impl Grid {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, counts: Vec<usize>, periodic: Vec<bool>) -> Result<Self, TabularError> {
        let n = counts.len();
        if n == 0 || lower.len() != n || upper.len() != n || periodic.len() != n {
            return Err(TabularError::InvalidGrid("bounds, counts and periodic flags must have equal nonzero length".into()));
        }
        if let Some(c) = counts.iter().find(|c| **c < 2) {
            return Err(TabularError::InvalidGrid(format!("cell count {c} is below 2")));
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(TabularError::InvalidGrid(format!("bounds [{lo}, {hi}] are not increasing")));
            }
        }
        let total = counts.iter().try_fold(1usize, |acc, c| acc.checked_mul(*c));
        match total {
            Some(t) if t <= u32::MAX as usize => {}
            _ => return Err(TabularError::InvalidGrid("total cell count does not fit in 32-bit indices".into())),
        }
        Ok(Self { lower, upper, counts, periodic })
    }

    /// Grid over the domain box and periodic flags of `env`.
    pub fn for_env(env: &EnvironmentSpec, counts: Vec<usize>) -> Result<Self, TabularError> {
        let (lower, upper) = env.domain.iter().map(|[lo, hi]| (*lo, *hi)).unzip();
        Self::new(lower, upper, counts, env.periodic.clone())
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn n_cells(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn spacing(&self, d: usize) -> f64 {
        (self.upper[d] - self.lower[d]) / self.counts[d] as f64
    }

    pub fn axis_center(&self, d: usize, i: usize) -> f64 {
        self.lower[d] + (i as f64 + 0.5) * self.spacing(d)
    }

    pub fn axis_centers(&self, d: usize) -> Vec<f64> {
        (0..self.counts[d]).map(|i| self.axis_center(d, i)).collect()
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        index.iter().zip(&self.counts).fold(0, |acc, (i, n)| acc * n + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Index {
        let mut index: Index = SmallVec::from_elem(0, self.dim());
        for d in (0..self.dim()).rev() {
            index[d] = flat % self.counts[d];
            flat /= self.counts[d];
        }
        index
    }

    pub fn center(&self, flat: usize) -> SmallVec<[f64; 6]> {
        let index = self.multi_index(flat);
        index.iter().enumerate().map(|(d, i)| self.axis_center(d, *i)).collect()
    }

    /// Fractional cell coordinate: cell `i` spans `[i, i + 1)`.
    fn scaled(&self, d: usize, x: f64) -> f64 {
        (x - self.lower[d]) / self.spacing(d)
    }

    fn axis_cell(&self, d: usize, x: f64) -> (usize, bool) {
        let n = self.counts[d];
        let p = self.scaled(d, x).floor();
        if self.periodic[d] {
            ((p.rem_euclid(n as f64) as usize).min(n - 1), false)
        } else {
            let out = x < self.lower[d] || x > self.upper[d];
            (p.clamp(0.0, (n - 1) as f64) as usize, out)
        }
    }

    /// Cell containing `x`; non-periodic coordinates outside the bounds clamp
    /// to the boundary cell and set the flag.
    pub fn locate(&self, x: &[f64]) -> Located {
        let mut cell = 0;
        let mut out_of_domain = false;
        for (d, xi) in x.iter().enumerate() {
            let (i, out) = self.axis_cell(d, *xi);
            cell = cell * self.counts[d] + i;
            out_of_domain |= out;
        }
        Located { cell, out_of_domain }
    }

    pub fn nearest_cell(&self, x: &[f64]) -> usize {
        self.locate(x).cell
    }

    /// Multilinear interpolation weights over the up to `2^n` surrounding
    /// cell centers. Non-periodic coordinates beyond the outermost centers
    /// use the boundary value.
    pub fn stencil(&self, x: &[f64]) -> (SmallVec<[(usize, f64); 8]>, bool) {
        let mut out_of_domain = false;
        let mut axes: SmallVec<[[(usize, f64); 2]; 6]> = SmallVec::new();
        for (d, xi) in x.iter().enumerate() {
            let n = self.counts[d];
            let p = self.scaled(d, *xi) - 0.5;
            let mut base = p.round();
            let mut t = p - base;
            if t.abs() < 1e-12 {
                t = 0.0;
            } else {
                base = p.floor();
                t = p - base;
            }
            if self.periodic[d] {
                let i0 = base.rem_euclid(n as f64) as usize % n;
                axes.push([(i0, 1.0 - t), ((i0 + 1) % n, t)]);
            } else {
                out_of_domain |= *xi < self.lower[d] || *xi > self.upper[d];
                if base < 0.0 {
                    axes.push([(0, 1.0), (0, 0.0)]);
                } else if base >= (n - 1) as f64 {
                    axes.push([(n - 1, 1.0), (n - 1, 0.0)]);
                } else {
                    let i0 = base as usize;
                    axes.push([(i0, 1.0 - t), (i0 + 1, t)]);
                }
            }
        }
        let mut points: SmallVec<[(usize, f64); 8]> = SmallVec::new();
        points.push((0, 1.0));
        for (d, axis) in axes.iter().enumerate() {
            let mut next: SmallVec<[(usize, f64); 8]> = SmallVec::new();
            for (cell, w) in &points {
                for (i, wi) in axis {
                    if *wi != 0.0 {
                        next.push((cell * self.counts[d] + i, w * wi));
                    }
                }
            }
            points = next;
        }
        (points, out_of_domain)
    }

    /// Euclidean distance between two cell centers, shortest way around on
    /// periodic dimensions.
    pub fn center_distance(&self, a: usize, b: usize) -> f64 {
        let ia = self.multi_index(a);
        let ib = self.multi_index(b);
        let mut sum = 0.0;
        for d in 0..self.dim() {
            let mut di = ia[d].abs_diff(ib[d]);
            if self.periodic[d] {
                di = di.min(self.counts[d] - di);
            }
            let delta = di as f64 * self.spacing(d);
            sum += delta * delta;
        }
        sum.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn cell_centers_1d() {
        let g = Grid::new(vec![0.0], vec![1.0], vec![3], vec![false]).unwrap();
        let c = g.axis_centers(0);
        assert!((c[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((c[1] - 0.5).abs() < 1e-15);
        assert!((c[2] - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn nearest_cell_of_center_is_itself() {
        let g = Grid::new(vec![-1.0, 0.0, 0.0], vec![1.0, 2.0, TAU], vec![5, 4, 6], vec![false, false, true]).unwrap();
        for cell in 0..g.n_cells() {
            assert_eq!(g.nearest_cell(&g.center(cell)), cell);
            assert_eq!(g.flat_index(&g.multi_index(cell)), cell);
        }
    }

    #[test]
    fn periodic_wraps_next_to_zero() {
        let g = Grid::new(vec![0.0], vec![TAU], vec![60], vec![true]).unwrap();
        let near_top = g.nearest_cell(&[TAU - 1e-9]);
        let zero = g.nearest_cell(&[0.0]);
        assert_eq!(zero, 0);
        assert!((g.center_distance(near_top, zero) - g.spacing(0)).abs() < 1e-12);
        assert_eq!(g.nearest_cell(&[TAU + 0.01]), 0);
        assert_eq!(g.nearest_cell(&[-0.01]), 59);
    }

    #[test]
    fn out_of_domain_clamps() {
        let g = Grid::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![4, 4], vec![false, false]).unwrap();
        let loc = g.locate(&[1.2, 0.5]);
        assert!(loc.out_of_domain);
        assert_eq!(g.multi_index(loc.cell).as_slice(), &[3, 2]);
        assert!(!g.locate(&[1.0, 0.0]).out_of_domain);
    }

    #[test]
    fn stencil_reproduces_linear_functions() {
        let g = Grid::new(vec![0.0, -1.0], vec![1.0, 1.0], vec![5, 7], vec![false, false]).unwrap();
        let f = |x: &[f64]| 2.0 * x[0] - 0.5 * x[1] + 0.25;
        let x = [0.37, 0.11];
        let (points, out) = g.stencil(&x);
        assert!(!out);
        assert_eq!(points.len(), 4);
        let total: f64 = points.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-15);
        let interp: f64 = points.iter().map(|(c, w)| w * f(&g.center(*c))).sum();
        assert!((interp - f(&x)).abs() < 1e-12);
    }

    #[test]
    fn stencil_at_center_is_single_cell() {
        let g = Grid::new(vec![0.0, 0.0], vec![1.0, TAU], vec![4, 8], vec![false, true]).unwrap();
        let (points, _) = g.stencil(&g.center(13));
        assert_eq!(points.as_slice(), &[(13, 1.0)]);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(vec![0.0], vec![1.0], vec![1], vec![false]).is_err());
        assert!(Grid::new(vec![1.0], vec![0.0], vec![3], vec![false]).is_err());
        assert!(Grid::new(vec![0.0], vec![1.0, 2.0], vec![3], vec![false]).is_err());
    }
}
