use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use super::optim::{Adam, OptimizerKind};
use super::NeuralError;
use crate::env::{EnvironmentSpec, State};
use crate::rng::{stream, Stream};

/// Which margin the network is regressed onto before training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarginTarget {
    /// `max{l, g}`
    OneStep,
    /// `g`
    Safety,
}

impl MarginTarget {
    pub fn eval(self, env: &EnvironmentSpec, s: &[f64]) -> f64 {
        let m = env.margins_of(s);
        match self {
            MarginTarget::OneStep => m.one_step(),
            MarginTarget::Safety => m.g,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    /// Size of the uniformly sampled training set.
    pub samples: usize,
    pub probes: usize,
    pub max_updates: u64,
    pub batch_size: usize,
    pub lr: f64,
    /// Stop once the probe mean squared error is at most this.
    pub tol: f64,
    pub check_every: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self { samples: 20_000, probes: 2_000, max_updates: 50_000, batch_size: 64, lr: 1e-3, tol: 1e-3, check_every: 250 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub updates: u64,
    pub probe_mse: f64,
    pub converged: bool,
}

fn probe_mse(net: &Mlp, xs: &[f64], ys: &[f64]) -> f64 {
    let n_out = net.n_outputs();
    let out = net.forward_batch(xs, ys.len());
    let mut sum = 0.0;
    for (row, y) in out.chunks(n_out).zip(ys) {
        sum += row.iter().map(|q| (q - y) * (q - y)).sum::<f64>();
    }
    sum / (ys.len() * n_out) as f64
}

fn sample_set(env: &EnvironmentSpec, target: MarginTarget, n: usize, rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(n * env.state_dim());
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let s: State = env.sample_state(rng);
        ys.push(target.eval(env, &s));
        xs.extend_from_slice(&s);
    }
    (xs, ys)
}

/// Regress every output of `net` onto the margin `target` over uniformly
/// sampled states. Keeps the best probe error seen if the budget runs out.
pub fn margin_pretrain(
    net: &mut Mlp,
    env: &EnvironmentSpec,
    target: MarginTarget,
    config: &PretrainConfig,
    seed: u64,
) -> Result<PretrainReport, NeuralError> {
    if config.samples == 0 || config.probes == 0 || config.batch_size == 0 || config.check_every == 0 {
        return Err(NeuralError::InvalidConfig("pretraining sizes must be positive".into()));
    }
    if net.n_inputs() != env.state_dim() {
        return Err(NeuralError::ShapeMismatch { expected: env.state_dim(), got: net.n_inputs() });
    }
    let mut rng = stream(seed, Stream::Init);
    let mut probe_rng = stream(seed, Stream::Probe);
    let (xs, ys) = sample_set(env, target, config.samples, &mut rng);
    let (px, py) = sample_set(env, target, config.probes, &mut probe_rng);
    let n_in = env.state_dim();
    let n_out = net.n_outputs();
    let mut opt = Adam::new(OptimizerKind::Adam, net.n_params());
    let mut grads = vec![0.0; net.n_params()];
    let mut best = (probe_mse(net, &px, &py), net.clone());
    let mut updates = 0;
    let mut batch_x = Vec::with_capacity(config.batch_size * n_in);
    let mut grad_out = vec![0.0; config.batch_size * n_out];
    while best.0 > config.tol && updates < config.max_updates {
        batch_x.clear();
        let idx = rand::seq::index::sample(&mut rng, ys.len(), config.batch_size.min(ys.len())).into_vec();
        for i in &idx {
            batch_x.extend_from_slice(&xs[i * n_in..(i + 1) * n_in]);
        }
        let cache = net.forward_train(&batch_x, idx.len());
        let scale = 2.0 / (idx.len() * n_out) as f64;
        for ((g, q), i) in grad_out.chunks_mut(n_out).zip(cache.output().chunks(n_out)).zip(&idx) {
            for (gj, qj) in g.iter_mut().zip(q) {
                *gj = scale * (qj - ys[*i]);
            }
        }
        grads.iter_mut().for_each(|g| *g = 0.0);
        net.backward(&cache, &grad_out[..idx.len() * n_out], &mut grads);
        opt.step(net.params_mut(), &grads, config.lr);
        updates += 1;
        if updates % config.check_every == 0 {
            let mse = probe_mse(net, &px, &py);
            if mse < best.0 {
                best = (mse, net.clone());
            }
        }
    }
    let converged = best.0 <= config.tol;
    if !converged {
        log::warn!("margin pretraining stopped at probe mse {:.3e} after {updates} updates", best.0);
    }
    *net = best.1;
    Ok(PretrainReport { updates, probe_mse: best.0, converged })
}
