//! Time-conditioned MLP velocity field with hand-written backpropagation,
//! plus Adam and an exponential moving average of the weights.
//!
//! Parameter layout: the network input is `[x, t]` (length `d + 1`). Layers
//! are stored in order (input layer, `depth − 1` hidden-to-hidden layers,
//! output layer); each contributes its weight matrix, shaped `in x out` and
//! stored row-major, followed by its bias of length `out`. Every hidden
//! layer is followed by SiLU, the output layer is affine.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture of a [`VelocityModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub dim: usize,
    pub width: usize,
    pub depth: usize,
}

impl Architecture {
    pub fn new(dim: usize, width: usize, depth: usize) -> Result<Self> {
        if dim == 0 || width == 0 || depth == 0 {
            return Err(Error::InvalidConfig(format!(
                "architecture needs positive dim/width/depth, got {dim}/{width}/{depth}"
            )));
        }
        Ok(Self { dim, width, depth })
    }

    /// `(in, out)` for every affine layer.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.depth + 1);
        shapes.push((self.dim + 1, self.width));
        for _ in 1..self.depth {
            shapes.push((self.width, self.width));
        }
        shapes.push((self.width, self.dim));
        shapes
    }

    pub fn param_count(&self) -> usize {
        let (d, w, l) = (self.dim, self.width, self.depth);
        (d + 1) * w + w + (l - 1) * (w * w + w) + w * d + d
    }
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            dim: 2,
            width: 64,
            depth: 3,
        }
    }
}

/// Stream id for parameter initialization; data streams use other ids.
pub const INIT_STREAM: u64 = 3;

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[inline]
fn silu(z: f64) -> f64 {
    z * sigmoid(z)
}

#[inline]
fn silu_grad(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 + z * (1.0 - s))
}

/// `v_θ(x, t)`: an MLP on the concatenated input `[x, t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityModel {
    arch: Architecture,
    params: Vec<f64>,
}

struct Layer {
    rows: usize,
    cols: usize,
    weight: usize,
    bias: usize,
}

impl VelocityModel {
    /// Fan-in scaled uniform initialization, `U(−1/√in, 1/√in)` for weights
    /// and biases alike, drawn from ChaCha stream [`INIT_STREAM`] of `seed`.
    pub fn new(arch: Architecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(INIT_STREAM);
        let mut params = Vec::with_capacity(arch.param_count());
        for (fan_in, out) in arch.layer_shapes() {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..(fan_in * out + out) {
                params.push(rng.random_range(-bound..bound));
            }
        }
        Self { arch, params }
    }

    pub fn zeros(arch: Architecture) -> Self {
        Self {
            arch,
            params: vec![0.0; arch.param_count()],
        }
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        if params.len() != arch.param_count() {
            return Err(Error::DimensionMismatch {
                expected: arch.param_count(),
                got: params.len(),
            });
        }
        Ok(Self { arch, params })
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn dim(&self) -> usize {
        self.arch.dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layers(&self) -> Vec<Layer> {
        let mut off = 0;
        self.arch
            .layer_shapes()
            .into_iter()
            .map(|(rows, cols)| {
                let l = Layer {
                    rows,
                    cols,
                    weight: off,
                    bias: off + rows * cols,
                };
                off += rows * cols + cols;
                l
            })
            .collect()
    }

    fn weight(&self, l: &Layer) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((l.rows, l.cols), &self.params[l.weight..l.bias]).unwrap()
    }

    fn input_matrix(&self, xs: &[f64], ts: &[f64]) -> Result<Array2<f64>> {
        let d = self.arch.dim;
        let n = ts.len();
        if xs.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                got: xs.len(),
            });
        }
        let mut input = Array2::zeros((n, d + 1));
        for (i, mut row) in input.axis_iter_mut(Axis(0)).enumerate() {
            for k in 0..d {
                row[k] = xs[i * d + k];
            }
            row[d] = ts[i];
        }
        Ok(input)
    }

    /// Pre-activations of every hidden layer, and the output.
    fn run(&self, input: Array2<f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>, Array2<f64>) {
        let layers = self.layers();
        let n = input.nrows();
        let mut pre = Vec::with_capacity(layers.len() - 1);
        let mut acts = Vec::with_capacity(layers.len());
        acts.push(input);
        for (li, l) in layers.iter().enumerate() {
            let mut z = Array2::zeros((n, l.cols));
            general_mat_mul(1.0, acts.last().unwrap(), &self.weight(l), 0.0, &mut z);
            let bias = &self.params[l.bias..l.bias + l.cols];
            for mut row in z.axis_iter_mut(Axis(0)) {
                for (v, b) in row.iter_mut().zip(bias) {
                    *v += b;
                }
            }
            if li + 1 == layers.len() {
                return (pre, acts, z);
            }
            let a = z.mapv(silu);
            pre.push(z);
            acts.push(a);
        }
        unreachable!("a network has at least one layer")
    }

    /// Batched forward pass: row `i` of the result is `v(x_i, t_i)`.
    /// `xs` is row-major `n x d`.
    pub fn forward_batch(&self, xs: &[f64], ts: &[f64]) -> Result<Vec<f64>> {
        let input = self.input_matrix(xs, ts)?;
        let (_, _, out) = self.run(input);
        Ok(out.into_raw_vec_and_offset().0)
    }

    pub fn forward(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        self.forward_batch(x, &[t])
    }

    /// Mean squared error `(1/n) Σ ‖v(x_i, t_i) − target_i‖²` and its exact
    /// gradient with respect to the flat parameter vector.
    pub fn loss_and_grad(&self, xs: &[f64], ts: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
        let n = ts.len();
        let d = self.arch.dim;
        if targets.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                got: targets.len(),
            });
        }
        if n == 0 {
            return Err(Error::InvalidConfig("empty training batch".into()));
        }
        let input = self.input_matrix(xs, ts)?;
        let (pre, acts, out) = self.run(input);

        let targets = ArrayView2::from_shape((n, d), targets).unwrap();
        let resid = &out - &targets;
        let loss = resid.iter().map(|r| r * r).sum::<f64>() / n as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss"));
        }

        let layers = self.layers();
        let mut grad = vec![0.0; self.params.len()];
        let mut delta = resid * (2.0 / n as f64);
        for li in (0..layers.len()).rev() {
            let l = &layers[li];
            {
                let (w_part, b_part) = grad[l.weight..l.bias + l.cols].split_at_mut(l.rows * l.cols);
                let mut gw = ArrayViewMut2::from_shape((l.rows, l.cols), w_part).unwrap();
                general_mat_mul(1.0, &acts[li].t(), &delta, 0.0, &mut gw);
                for row in delta.axis_iter(Axis(0)) {
                    for (g, v) in b_part.iter_mut().zip(row) {
                        *g += v;
                    }
                }
            }
            if li == 0 {
                break;
            }
            let mut back = Array2::zeros((n, l.rows));
            general_mat_mul(1.0, &delta, &self.weight(l).t(), 0.0, &mut back);
            back.zip_mut_with(&pre[li - 1], |b, &z| *b *= silu_grad(z));
            delta = back;
        }
        Ok((loss, grad))
    }
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(config: AdamConfig, len: usize) -> Self {
        Self {
            config,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                expected: self.m.len(),
                got: params.len().min(grad.len()),
            });
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        self.step += 1;
        let c1 = 1.0 - beta1.powf(self.step as f64);
        let c2 = 1.0 - beta2.powf(self.step as f64);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Exponential moving average of the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EmaState {
    pub decay: f64,
    pub shadow: Vec<f64>,
}

impl EmaState {
    pub fn new(decay: f64, init: &[f64]) -> Result<Self> {
        if !(0.0..=1.0).contains(&decay) {
            return Err(Error::InvalidConfig(format!("EMA decay {decay} outside [0, 1]")));
        }
        Ok(Self {
            decay,
            shadow: init.to_vec(),
        })
    }

    pub fn update(&mut self, params: &[f64]) {
        let a = self.decay;
        for (s, p) in self.shadow.iter_mut().zip(params) {
            *s = a * *s + (1.0 - a) * p;
        }
    }
}
