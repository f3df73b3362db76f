use serde::{Deserialize, Serialize};

use super::hausdorff::{directed_hausdorff, SetDistance};
use super::CertifyError;
use crate::tabular::ValueGrid;

/// Comparison of two consecutive fixed points of a discount ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderStep {
    pub gamma_low: f64,
    pub gamma_high: f64,
    /// Cells in the lower mask but not the higher one.
    pub mask_violations: usize,
    /// Largest `V_high - V_low` over cells.
    pub max_value_increase: f64,
    pub values_monotone: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub gammas: Vec<f64>,
    pub ra_cells: Vec<usize>,
    pub steps: Vec<LadderStep>,
    /// Directed distance from the reference mask to each rung's mask.
    pub distance_to_reference: Vec<SetDistance>,
    pub nested: bool,
    pub distances_non_increasing: bool,
}

/// Check nesting of the zero sub-level sets and pointwise value monotonicity
/// along increasing discount factors. `reference` defaults to the last rung.
pub fn gamma_ladder_report(ladder: &[(f64, &ValueGrid)], reference: Option<&ValueGrid>, tol: f64) -> Result<LadderReport, CertifyError> {
    let Some((_, first)) = ladder.first() else {
        return Err(CertifyError::EmptyStateSet);
    };
    let reference = reference.unwrap_or(ladder[ladder.len() - 1].1);
    for (_, vg) in ladder.iter().skip(1).chain(std::iter::once(&(0.0, reference))) {
        if vg.grid != first.grid {
            return Err(CertifyError::MaskShape { expected: first.grid.n_cells(), got: vg.grid.n_cells() });
        }
    }
    if ladder.windows(2).any(|w| !(w[0].0 < w[1].0)) {
        return Err(CertifyError::LadderOrder);
    }
    let masks: Vec<Vec<bool>> = ladder.iter().map(|(_, vg)| vg.ra_mask()).collect();
    let steps: Vec<LadderStep> = ladder
        .windows(2)
        .zip(masks.windows(2))
        .map(|(w, m)| {
            let mask_violations = m[0].iter().zip(&m[1]).filter(|(lo, hi)| **lo && !**hi).count();
            let max_value_increase = w[1].1.values.iter().zip(&w[0].1.values).map(|(hi, lo)| hi - lo).fold(f64::NEG_INFINITY, f64::max);
            LadderStep {
                gamma_low: w[0].0,
                gamma_high: w[1].0,
                mask_violations,
                max_value_increase,
                values_monotone: max_value_increase <= tol,
            }
        })
        .collect();
    let reference_mask = reference.ra_mask();
    let distance_to_reference = masks
        .iter()
        .map(|m| directed_hausdorff(&reference_mask, m, &first.grid))
        .collect::<Result<Vec<_>, _>>()?;
    let distances_non_increasing = distance_to_reference.windows(2).all(|w| w[1].value <= w[0].value);
    Ok(LadderReport {
        gammas: ladder.iter().map(|(g, _)| *g).collect(),
        ra_cells: masks.iter().map(|m| m.iter().filter(|c| **c).count()).collect(),
        nested: steps.iter().all(|s| s.mask_violations == 0),
        steps,
        distance_to_reference,
        distances_non_increasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::Grid;

    fn vg(values: Vec<f64>) -> ValueGrid {
        ValueGrid::new(Grid::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![2, 3], vec![false, false]).unwrap(), values).unwrap()
    }

    #[test]
    fn nested_ladder_passes() {
        let a = vg(vec![1.0, 0.5, -0.1, 2.0, 1.0, 0.3]);
        let b = vg(vec![0.9, -0.2, -0.3, 1.5, 1.0, 0.1]);
        let c = vg(vec![0.9, -0.2, -0.4, 1.5, -0.1, -0.1]);
        let r = gamma_ladder_report(&[(0.5, &a), (0.9, &b), (0.99, &c)], None, 1e-9).unwrap();
        assert!(r.nested && r.distances_non_increasing);
        assert!(r.steps.iter().all(|s| s.values_monotone));
        assert_eq!(r.ra_cells, vec![1, 2, 4]);
        assert_eq!(r.distance_to_reference[2].value, 0.0);
    }

    #[test]
    fn violation_is_counted() {
        let a = vg(vec![-1.0, 0.5, -0.1, 2.0, 1.0, 0.3]);
        let b = vg(vec![0.9, -0.2, -0.3, 1.5, 1.0, 0.1]);
        let r = gamma_ladder_report(&[(0.5, &a), (0.9, &b)], None, 1e-9).unwrap();
        assert!(!r.nested);
        assert_eq!(r.steps[0].mask_violations, 1);
        assert!(!r.steps[0].values_monotone);
        assert!(gamma_ladder_report(&[(0.9, &a), (0.5, &b)], None, 1e-9).is_err());
    }
}
