use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NeuralError;

/// Fully connected network with tanh hidden layers and a linear output.
///
/// Parameters live in one flat vector, layer by layer: the weight matrix
/// stored input-major (`w[i * out + j]` connects input `i` to output `j`)
/// followed by the bias. Inputs are standardised as `(x - center) / scale`
/// before the first layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "NetworkFile", try_from = "NetworkFile")]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
    input_center: Vec<f64>,
    input_scale: Vec<f64>,
}

/// Activations kept from a training forward pass.
#[derive(Clone, Debug, Default)]
pub struct ForwardCache {
    batch: usize,
    /// `acts[k]` is the input to layer `k`; the last entry is the output.
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..n {
        sum += a[i] * b[i];
    }
    sum
}

/// `y += alpha * x`
#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Result<Self, NeuralError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(NeuralError::InvalidArchitecture(format!("{sizes:?}")));
        }
        let n: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; n],
            input_center: vec![0.0; sizes[0]],
            input_scale: vec![1.0; sizes[0]],
        })
    }

    /// Xavier-uniform weights and zero biases.
    pub fn xavier<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self, NeuralError> {
        let mut net = Self::zeros(sizes)?;
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_in * fan_out] {
                *p = rng.random_range(-bound..bound);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    /// Map each input from `[lo, hi]` onto `[-1, 1]`.
    pub fn with_input_box(mut self, bounds: &[[f64; 2]]) -> Result<Self, NeuralError> {
        if bounds.len() != self.n_inputs() {
            return Err(NeuralError::ShapeMismatch { expected: self.n_inputs(), got: bounds.len() });
        }
        self.input_center = bounds.iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect();
        self.input_scale = bounds.iter().map(|[lo, hi]| 0.5 * (hi - lo)).collect();
        Ok(self)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn n_outputs(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.sizes == other.sizes
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.sizes.windows(2).map(move |w| {
            let start = offset;
            offset += w[0] * w[1] + w[1];
            (start, w[0], w[1])
        })
    }

    fn standardize(&self, xs: &[f64], batch: usize) -> Vec<f64> {
        let n = self.n_inputs();
        let mut out = Vec::with_capacity(batch * n);
        for row in xs.chunks(n) {
            out.extend(row.iter().zip(&self.input_center).zip(&self.input_scale).map(|((x, c), s)| (x - c) / s));
        }
        out
    }

    fn layer_forward(&self, start: usize, n_in: usize, n_out: usize, input: &[f64], batch: usize, hidden: bool) -> Vec<f64> {
        let w = &self.params[start..start + n_in * n_out];
        let b = &self.params[start + n_in * n_out..start + n_in * n_out + n_out];
        let mut out = vec![0.0; batch * n_out];
        for (x, z) in input.chunks(n_in).zip(out.chunks_mut(n_out)) {
            z.copy_from_slice(b);
            for (i, xi) in x.iter().enumerate() {
                if *xi != 0.0 {
                    axpy(*xi, &w[i * n_out..(i + 1) * n_out], z);
                }
            }
            if hidden {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
        }
        out
    }

    /// Outputs for `batch` inputs stored row-major in `xs`.
    pub fn forward_batch(&self, xs: &[f64], batch: usize) -> Vec<f64> {
        debug_assert_eq!(xs.len(), batch * self.n_inputs());
        let n_layers = self.sizes.len() - 1;
        let mut act = self.standardize(xs, batch);
        for (k, (start, n_in, n_out)) in self.layers().enumerate() {
            act = self.layer_forward(start, n_in, n_out, &act, batch, k + 1 < n_layers);
        }
        act
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_batch(x, 1)
    }

    pub fn forward_train(&self, xs: &[f64], batch: usize) -> ForwardCache {
        let n_layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(self.standardize(xs, batch));
        for (k, (start, n_in, n_out)) in self.layers().enumerate() {
            let next = self.layer_forward(start, n_in, n_out, &acts[k], batch, k + 1 < n_layers);
            acts.push(next);
        }
        ForwardCache { batch, acts }
    }

    /// Accumulate into `grads` the gradient of a scalar loss whose gradient
    /// with respect to the outputs is `grad_out` (row-major, batch x outputs).
    pub fn backward(&self, cache: &ForwardCache, grad_out: &[f64], grads: &mut [f64]) {
        let n_layers = self.sizes.len() - 1;
        let layers: Vec<_> = self.layers().collect();
        let mut delta = grad_out.to_vec();
        for k in (0..n_layers).rev() {
            let (start, n_in, n_out) = layers[k];
            let input = &cache.acts[k];
            let (gw, rest) = grads[start..start + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            let gb = rest;
            for (x, d) in input.chunks(n_in).zip(delta.chunks(n_out)) {
                axpy(1.0, d, gb);
                for (i, xi) in x.iter().enumerate() {
                    if *xi != 0.0 {
                        axpy(*xi, d, &mut gw[i * n_out..(i + 1) * n_out]);
                    }
                }
            }
            if k == 0 {
                break;
            }
            let w = &self.params[start..start + n_in * n_out];
            let mut prev = vec![0.0; cache.batch * n_in];
            for ((p, d), a) in prev.chunks_mut(n_in).zip(delta.chunks(n_out)).zip(input.chunks(n_in)) {
                for i in 0..n_in {
                    p[i] = dot(&w[i * n_out..(i + 1) * n_out], d) * (1.0 - a[i] * a[i]);
                }
            }
            delta = prev;
        }
    }
}

/// Portable weight file: layer sizes and, per layer, an `out x in`
/// row-major weight matrix and a bias vector.
#[derive(Serialize, Deserialize)]
struct NetworkFile {
    sizes: Vec<usize>,
    input_center: Vec<f64>,
    input_scale: Vec<f64>,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl From<Mlp> for NetworkFile {
    fn from(net: Mlp) -> Self {
        let layers = net
            .layers()
            .map(|(start, n_in, n_out)| LayerFile {
                weights: (0..n_out).map(|j| (0..n_in).map(|i| net.params[start + i * n_out + j]).collect()).collect(),
                bias: net.params[start + n_in * n_out..start + n_in * n_out + n_out].to_vec(),
            })
            .collect();
        NetworkFile { sizes: net.sizes.clone(), input_center: net.input_center.clone(), input_scale: net.input_scale.clone(), layers }
    }
}

impl TryFrom<NetworkFile> for Mlp {
    type Error = NeuralError;

    fn try_from(file: NetworkFile) -> Result<Self, NeuralError> {
        let mut net = Mlp::zeros(&file.sizes)?;
        let n_in = net.n_inputs();
        if file.input_center.len() != n_in || file.input_scale.len() != n_in || file.layers.len() != file.sizes.len() - 1 {
            return Err(NeuralError::InvalidArchitecture("weight file does not match its layer sizes".into()));
        }
        net.input_center = file.input_center;
        net.input_scale = file.input_scale;
        let layers: Vec<_> = net.layers().collect();
        for ((start, n_in, n_out), layer) in layers.into_iter().zip(file.layers) {
            if layer.weights.len() != n_out || layer.weights.iter().any(|r| r.len() != n_in) || layer.bias.len() != n_out {
                return Err(NeuralError::InvalidArchitecture("weight matrix shape mismatch".into()));
            }
            for (j, row) in layer.weights.iter().enumerate() {
                for (i, w) in row.iter().enumerate() {
                    net.params[start + i * n_out + j] = *w;
                }
            }
            net.params[start + n_in * n_out..start + n_in * n_out + n_out].copy_from_slice(&layer.bias);
        }
        if net.params.iter().any(|p| !p.is_finite()) {
            return Err(NeuralError::NonFinite);
        }
        Ok(net)
    }
}
