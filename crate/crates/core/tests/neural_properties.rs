use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reach_avoid::env::State;
use reach_avoid::neural::{soft_update, Mlp, ReplayBuffer, Transition};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn transition(tag: f64) -> Transition {
    Transition {
        state: State::new(&[tag]),
        action: 0,
        next_state: State::new(&[tag]),
        terminal: false,
        l: 0.0,
        g: 0.0,
        l_next: 0.0,
        g_next: 0.0,
    }
}

/// Squared-output loss `0.5 * sum(w_k * y_k^2)` over a batch.
fn loss(net: &Mlp, xs: &[f64], batch: usize, weights: &[f64]) -> f64 {
    net.forward_batch(xs, batch).iter().zip(weights).map(|(y, w)| 0.5 * w * y * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn backward_matches_central_differences(
        seed in any::<u64>(),
        hidden in prop::collection::vec(1usize..8, 1..3),
        batch in 1usize..4,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes: Vec<usize> = std::iter::once(3).chain(hidden).chain(std::iter::once(2)).collect();
        let net = Mlp::xavier(&sizes, &mut rng).unwrap().with_input_box(&[[-1.0, 1.0], [0.0, 4.0], [-3.0, 3.0]]).unwrap();
        let xs: Vec<f64> = (0..batch * 3).map(|i| ((seed >> (i % 48)) & 0xff) as f64 / 64.0 - 2.0).collect();
        let weights: Vec<f64> = (0..batch * 2).map(|i| 0.5 + i as f64 * 0.25).collect();

        let cache = net.forward_train(&xs, batch);
        let grad_out: Vec<f64> = cache.output().iter().zip(&weights).map(|(y, w)| w * y).collect();
        let mut grads = vec![0.0; net.n_params()];
        net.backward(&cache, &grad_out, &mut grads);

        let h = 1e-6;
        for p in 0..net.n_params() {
            let mut up = net.clone();
            up.params_mut()[p] += h;
            let mut down = net.clone();
            down.params_mut()[p] -= h;
            let numeric = (loss(&up, &xs, batch, &weights) - loss(&down, &xs, batch, &weights)) / (2.0 * h);
            let scale = numeric.abs().max(grads[p].abs()).max(1e-3);
            prop_assert!((numeric - grads[p]).abs() / scale < 1e-5, "param {p}: {numeric} vs {}", grads[p]);
        }
    }

    #[test]
    fn target_lags_by_geometric_factor(tau in 0.001f64..1.0, k in 1i32..50, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let online = Mlp::xavier(&[2, 4, 3], &mut rng).unwrap();
        let start = Mlp::xavier(&[2, 4, 3], &mut rng).unwrap();
        let mut target = start.clone();
        for _ in 0..k {
            soft_update(&mut target, &online, tau).unwrap();
        }
        let lag = (1.0 - tau).powi(k);
        for ((t, o), s) in target.params().iter().zip(online.params()).zip(start.params()) {
            prop_assert!((t - (o + lag * (s - o))).abs() < 1e-12);
        }
    }

    #[test]
    fn ring_buffer_keeps_the_newest(capacity in 1usize..50, pushes in 0usize..200) {
        let mut buffer = ReplayBuffer::new(capacity);
        for i in 0..pushes {
            buffer.push(transition(i as f64));
        }
        prop_assert_eq!(buffer.len(), pushes.min(capacity));
        let mut held: Vec<usize> = (0..buffer.len()).map(|i| buffer.get(i).state[0] as usize).collect();
        held.sort_unstable();
        let expected: Vec<usize> = (pushes.saturating_sub(capacity)..pushes).collect();
        prop_assert_eq!(held, expected);
    }
}

#[test]
fn replay_sampling_is_uniform() {
    let n = 50;
    let mut buffer = ReplayBuffer::new(n);
    for i in 0..n {
        buffer.push(transition(i as f64));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut counts = vec![0u64; n];
    let draws = 20_000;
    for _ in 0..draws {
        let idx = buffer.sample_indices(&mut rng, 10);
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 10);
        for i in idx {
            counts[i] += 1;
        }
    }
    let expected = (draws * 10) as f64 / n as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((n - 1) as f64).unwrap().cdf(stat);
    assert!(p > 1e-3, "chi-square {stat}, p = {p}");
}
