use proptest::prelude::*;
use reach_avoid::env::EnvironmentSpec;
use reach_avoid::tabular::{finite_horizon, solve, value_iteration, Grid, Lookup, Successor, TransitionTable, ViOptions};
use smallvec::smallvec;

/// Optimal payoff over all action sequences of length `depth`, by plain
/// enumeration of every trace: `min_t max{l_t, max_{k<=t} g_k}`.
fn enumerate(l: &[f64], g: &[f64], succ: &[Vec<usize>], s: usize, depth: usize, worst_g: f64, best: f64) -> f64 {
    let worst_g = worst_g.max(g[s]);
    let best = best.min(l[s].max(worst_g));
    if depth == 0 {
        return best;
    }
    succ[s].iter().map(|&n| enumerate(l, g, succ, n, depth - 1, worst_g, best)).fold(f64::INFINITY, f64::min)
}

fn toy_model() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<Vec<usize>>)> {
    (2usize..=200, 1usize..=3).prop_flat_map(|(n, actions)| {
        (
            prop::collection::vec(-1.0f64..3.0, n),
            prop::collection::vec(-3.0f64..1.0, n),
            prop::collection::vec(prop::collection::vec(0..n, actions), n),
        )
    })
}

fn build(l: &[f64], g: &[f64], succ: &[Vec<usize>]) -> TransitionTable {
    let n_actions = succ[0].len();
    let successors = succ.iter().flatten().map(|&c| Successor::Cells(smallvec![(c as u32, 1.0)])).collect();
    TransitionTable::from_parts(l.to_vec(), g.to_vec(), n_actions, successors).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn finite_horizon_sweeps_equal_trace_enumeration((l, g, succ) in toy_model(), horizon in 0usize..=8) {
        let model = build(&l, &g, &succ);
        let swept = finite_horizon(&model, horizon);
        for s in 0..l.len() {
            let oracle = enumerate(&l, &g, &succ, s, horizon, f64::NEG_INFINITY, f64::INFINITY);
            prop_assert!((swept[s] - oracle).abs() <= 1e-12, "state {s}: {} vs {oracle}", swept[s]);
        }
    }

    #[test]
    fn fixed_points_obey_sign_invariants((l, g, succ) in toy_model(), gamma in 0.0f64..0.999) {
        let model = build(&l, &g, &succ);
        let (v, report) = solve(&model, gamma, 1e-10, 1_000_000, None).unwrap();
        prop_assert!(report.converged);
        let again = model.backup(&v, gamma);
        prop_assert!(again.iter().zip(&v).all(|(a, b)| (a - b).abs() <= 1e-10));
        for s in 0..l.len() {
            if g[s] > 0.0 {
                prop_assert!(v[s] >= g[s] - 1e-12, "state {s}: {} < {}", v[s], g[s]);
            }
            if l[s] <= 0.0 && g[s] <= 0.0 {
                prop_assert!(v[s] <= 0.0);
            }
        }
    }
}

#[test]
fn ten_step_horizon_on_a_full_toy_grid() {
    // 200 cells with three actions, depth 10: 3^10 sequences per cell
    let n = 200;
    let l: Vec<f64> = (0..n).map(|i| ((i * 37 % 101) as f64 / 25.0) - 0.3).collect();
    let g: Vec<f64> = (0..n).map(|i| ((i * 53 % 97) as f64 / 30.0) - 2.8).collect();
    let succ: Vec<Vec<usize>> = (0..n).map(|i| vec![(i + 1) % n, (i * 7 + 3) % n, (i * 13 + 11) % n]).collect();
    let model = build(&l, &g, &succ);
    let swept = finite_horizon(&model, 10);
    for s in 0..n {
        assert_eq!(swept[s], enumerate(&l, &g, &succ, s, 10, f64::NEG_INFINITY, f64::INFINITY));
    }
}

#[test]
fn environment_fixed_points_obey_sign_invariants() {
    let cases = [(EnvironmentSpec::particle(), vec![41, 121]), (EnvironmentSpec::dubins_high_turn(), vec![21, 21, 24])];
    for (env, counts) in cases {
        let grid = Grid::for_env(&env, counts).unwrap();
        for gamma in [0.5, 0.9, 0.99] {
            let (vg, report) = value_iteration(&env, &grid, &ViOptions { gamma, tol: 1e-9, ..Default::default() }).unwrap();
            assert!(report.converged);
            let model = TransitionTable::build(&env, &grid, Lookup::Snap).unwrap();
            let again = model.backup(&vg.values, gamma);
            assert!(again.iter().zip(&vg.values).all(|(a, b)| (a - b).abs() <= 1e-9));
            for c in 0..grid.n_cells() {
                let m = env.margins_of(&grid.center(c));
                if m.g > 0.0 {
                    assert!(vg.values[c] >= m.g);
                }
                if m.l <= 0.0 && m.g <= 0.0 {
                    assert!(vg.values[c] <= 0.0);
                }
            }
        }
    }
}
