use serde::{Deserialize, Serialize};

use super::CertifyError;
use crate::tabular::Grid;

/// A set distance; `empty` marks an empty operand, reported as infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetDistance {
    pub value: f64,
    pub empty: bool,
}

fn members(mask: &[bool], grid: &Grid) -> Vec<Vec<f64>> {
    mask.iter()
        .enumerate()
        .filter(|(_, m)| **m)
        .map(|(c, _)| grid.multi_index(c).iter().enumerate().map(|(d, i)| *i as f64 * grid.spacing(d)).collect())
        .collect()
}

fn distance(a: &[f64], b: &[f64], periods: &[Option<f64>]) -> f64 {
    let mut sum = 0.0;
    for ((x, y), period) in a.iter().zip(b).zip(periods) {
        let mut d = (x - y).abs();
        if let Some(p) = period {
            d = d.min(p - d);
        }
        sum += d * d;
    }
    sum.sqrt()
}

/// `max_{a in A} min_{b in B} |a - b|` over cell centers, periodic-aware.
pub fn directed_hausdorff(a: &[bool], b: &[bool], grid: &Grid) -> Result<SetDistance, CertifyError> {
    if a.len() != grid.n_cells() || b.len() != grid.n_cells() {
        return Err(CertifyError::MaskShape { expected: grid.n_cells(), got: a.len().max(b.len()) });
    }
    let pa = members(a, grid);
    let pb = members(b, grid);
    if pa.is_empty() || pb.is_empty() {
        return Ok(SetDistance { value: f64::INFINITY, empty: true });
    }
    let periods: Vec<Option<f64>> = (0..grid.dim())
        .map(|d| grid.periodic()[d].then(|| grid.upper()[d] - grid.lower()[d]))
        .collect();
    let mut worst: f64 = 0.0;
    for (cell, x) in a.iter().enumerate().filter(|(_, m)| **m).map(|(c, _)| c).zip(&pa) {
        if b[cell] {
            continue;
        }
        let nearest = pb.iter().map(|y| distance(x, y, &periods)).fold(f64::INFINITY, f64::min);
        worst = worst.max(nearest);
    }
    Ok(SetDistance { value: worst, empty: false })
}

/// Symmetric Hausdorff distance.
pub fn hausdorff_distance(a: &[bool], b: &[bool], grid: &Grid) -> Result<SetDistance, CertifyError> {
    let ab = directed_hausdorff(a, b, grid)?;
    let ba = directed_hausdorff(b, a, grid)?;
    Ok(SetDistance { value: ab.value.max(ba.value), empty: ab.empty || ba.empty })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(vec![0.0, 0.0], vec![1.0, 2.0], vec![10, 10], vec![false, false]).unwrap()
    }

    #[test]
    fn identical_masks_have_zero_distance() {
        let g = grid();
        let mask: Vec<bool> = (0..100).map(|i| i % 7 == 0).collect();
        assert_eq!(hausdorff_distance(&mask, &mask, &g).unwrap().value, 0.0);
    }

    #[test]
    fn neighbouring_cells_are_one_pitch_apart() {
        let g = grid();
        let mut a = vec![false; 100];
        let mut b = vec![false; 100];
        a[g.flat_index(&[3, 4])] = true;
        b[g.flat_index(&[3, 5])] = true;
        assert!((hausdorff_distance(&a, &b, &g).unwrap().value - 0.2).abs() < 1e-12);
        b[g.flat_index(&[3, 5])] = false;
        b[g.flat_index(&[4, 4])] = true;
        assert!((hausdorff_distance(&a, &b, &g).unwrap().value - 0.1).abs() < 1e-12);
    }

    #[test]
    fn directed_distance_of_subset_is_zero() {
        let g = grid();
        let small: Vec<bool> = (0..100).map(|i| i < 20).collect();
        let big: Vec<bool> = (0..100).map(|i| i < 50).collect();
        assert_eq!(directed_hausdorff(&small, &big, &g).unwrap().value, 0.0);
        assert!((directed_hausdorff(&big, &small, &g).unwrap().value - 0.3).abs() < 1e-12);
    }

    #[test]
    fn periodic_dimension_wraps() {
        let g = Grid::new(vec![0.0], vec![std::f64::consts::TAU], vec![12], vec![true]).unwrap();
        let mut a = vec![false; 12];
        let mut b = vec![false; 12];
        a[0] = true;
        b[11] = true;
        assert!((hausdorff_distance(&a, &b, &g).unwrap().value - g.spacing(0)).abs() < 1e-12);
    }

    #[test]
    fn empty_mask_is_flagged() {
        let g = grid();
        let r = hausdorff_distance(&vec![false; 100], &vec![true; 100], &g).unwrap();
        assert!(r.empty && r.value.is_infinite());
        assert!(hausdorff_distance(&[true], &[true], &g).is_err());
    }
}
