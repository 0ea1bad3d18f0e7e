//! Small fully connected networks trained with backpropagation and Adam.
//!
//! Batches are row-major matrices, one sample per row.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.2;
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    LeakyRelu,
    Sigmoid,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Derivative, given the pre-activation `x` and its image `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::LengthMismatch {
                    left: r.len(),
                    right: cols,
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid Adam configuration {self:?}")))
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment accumulators for a flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    /// Bias-corrected Adam update. Rejects the whole step if any gradient is
    /// non-finite, leaving parameters and moments untouched.
    pub fn step(&mut self, config: &AdamConfig, params: &mut [f64], grads: &[f64]) -> Result<()> {
        self.step_parts(config, vec![(params, grads)])
    }

    fn step_parts(&mut self, config: &AdamConfig, parts: Vec<(&mut [f64], &[f64])>) -> Result<()> {
        config.validate()?;
        let mut total = 0;
        for (p, g) in &parts {
            if p.len() != g.len() {
                return Err(Error::LengthMismatch {
                    left: p.len(),
                    right: g.len(),
                });
            }
            if let Some(x) = g.iter().find(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("gradient {x}")));
            }
            total += g.len();
        }
        if total != self.m.len() {
            return Err(Error::LengthMismatch {
                left: total,
                right: self.m.len(),
            });
        }

        self.t += 1;
        let bc1 = 1.0 - config.beta1.powi(self.t as i32);
        let bc2 = 1.0 - config.beta2.powi(self.t as i32);
        let mut k = 0;
        for (params, grads) in parts {
            for (p, &g) in params.iter_mut().zip(grads) {
                let m = &mut self.m[k];
                let v = &mut self.v[k];
                *m = config.beta1 * *m + (1.0 - config.beta1) * g;
                *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= config.lr * m_hat / (v_hat.sqrt() + config.epsilon);
                k += 1;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs × inputs`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    pub layers: Vec<Dense>,
    pub adam: AdamState,
    #[serde(skip)]
    version: u64,
}

/// Activations recorded by [`DenseNet::forward`] for a later backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    version: u64,
    pre: Vec<Matrix>,
    /// `post[0]` is the input batch, `post[l + 1]` the output of layer `l`.
    post: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.post.last().expect("cache holds the input at least")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
    /// ∂loss/∂input, one row per sample.
    pub input: Matrix,
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
            .copied()
            .collect()
    }

    /// Element-wise sum, used to combine the real and fake halves of a batch.
    pub fn add(&mut self, other: &Gradients) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::LengthMismatch {
                left: self.layers.len(),
                right: other.layers.len(),
            });
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
        Ok(())
    }
}

impl DenseNet {
    /// Builds a net with `sizes = [in, hidden…, out]`. Weights and biases are
    /// drawn uniformly from `±1/√fan_in`.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid(format!("invalid layer sizes {sizes:?}")));
        }
        let n_layers = sizes.len() - 1;
        let layers: Vec<Dense> = sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let (inputs, outputs) = (w[0], w[1]);
                let bound = 1.0 / (inputs as f64).sqrt();
                let weights = (0..inputs * outputs)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect();
                let bias = (0..outputs).map(|_| rng.random_range(-bound..bound)).collect();
                Dense {
                    inputs,
                    outputs,
                    weights,
                    bias,
                    activation: if l + 1 == n_layers { output } else { hidden },
                }
            })
            .collect();
        let n_params = layers.iter().map(|l| l.weights.len() + l.bias.len()).sum();
        Ok(Self {
            layers,
            adam: AdamState::new(n_params),
            version: 0,
        })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn n_params(&self) -> usize {
        self.adam.m.len()
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
            .copied()
            .collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::LengthMismatch {
                left: flat.len(),
                right: self.n_params(),
            });
        }
        let mut it = flat.iter();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = *it.next().unwrap());
        }
        self.version += 1;
        Ok(())
    }

    pub fn forward(&self, input: &Matrix) -> Result<ForwardCache> {
        if input.cols != self.input_width() {
            return Err(Error::LengthMismatch {
                left: input.cols,
                right: self.input_width(),
            });
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len() + 1);
        post.push(input.clone());
        for layer in &self.layers {
            let x = post.last().unwrap();
            let mut z = Matrix::zeros(x.rows, layer.outputs);
            for s in 0..x.rows {
                let xs = x.row(s);
                for (o, zo) in z.row_mut(s).iter_mut().enumerate() {
                    let w = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    *zo = layer.bias[o] + w.iter().zip(xs).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            let y = Matrix {
                rows: z.rows,
                cols: z.cols,
                data: z.data.iter().map(|&v| layer.activation.apply(v)).collect(),
            };
            pre.push(z);
            post.push(y);
        }
        Ok(ForwardCache {
            version: self.version,
            pre,
            post,
        })
    }

    /// Forward pass returning only the output batch.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        Ok(self.forward(input)?.post.pop().unwrap())
    }

    /// Reverse-mode gradients of a loss whose gradient with respect to the
    /// network output is `grad_output`.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &Matrix) -> Result<Gradients> {
        if cache.version != self.version || cache.pre.len() != self.layers.len() {
            return Err(Error::StaleCache);
        }
        let out = cache.output();
        if grad_output.rows != out.rows || grad_output.cols != out.cols {
            return Err(Error::LengthMismatch {
                left: grad_output.data.len(),
                right: out.data.len(),
            });
        }

        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = grad_output.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre[l];
            let y = &cache.post[l + 1];
            let x = &cache.post[l];
            let delta: Vec<f64> = upstream
                .data
                .iter()
                .zip(z.data.iter().zip(&y.data))
                .map(|(g, (&zv, &yv))| g * layer.activation.derivative(zv, yv))
                .collect();

            let mut dw = vec![0.0; layer.weights.len()];
            let mut db = vec![0.0; layer.outputs];
            let mut dx = Matrix::zeros(x.rows, layer.inputs);
            for s in 0..x.rows {
                let xs = x.row(s);
                let ds = &delta[s * layer.outputs..(s + 1) * layer.outputs];
                let dxs = dx.row_mut(s);
                for (o, &d) in ds.iter().enumerate() {
                    db[o] += d;
                    let w = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    let dwo = &mut dw[o * layer.inputs..(o + 1) * layer.inputs];
                    for i in 0..layer.inputs {
                        dwo[i] += d * xs[i];
                        dxs[i] += d * w[i];
                    }
                }
            }
            grads.push(LayerGrad {
                weights: dw,
                bias: db,
            });
            upstream = dx;
        }
        grads.reverse();
        Ok(Gradients {
            layers: grads,
            input: upstream,
        })
    }

    pub fn adam_step(&mut self, grads: &Gradients, config: &AdamConfig) -> Result<()> {
        if grads.layers.len() != self.layers.len() {
            return Err(Error::LengthMismatch {
                left: grads.layers.len(),
                right: self.layers.len(),
            });
        }
        let parts = self
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .flat_map(|(l, g)| {
                [
                    (l.weights.as_mut_slice(), g.weights.as_slice()),
                    (l.bias.as_mut_slice(), g.bias.as_slice()),
                ]
            })
            .collect();
        self.adam.step_parts(config, parts)?;
        self.version += 1;
        Ok(())
    }
}

pub fn bce_loss(pred: &[f64], labels: &[f64]) -> Result<f64> {
    check_len(pred, labels)?;
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / n)
}

/// ∂(mean BCE)/∂p.
pub fn bce_grad(pred: &[f64], labels: &[f64]) -> Result<Vec<f64>> {
    check_len(pred, labels)?;
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            (p - y) / (p * (1.0 - p)) / n
        })
        .collect())
}

pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_len(pred, target)?;
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64)
}

/// ∂(mean squared error)/∂pred.
pub fn mse_grad(pred: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    check_len(pred, target)?;
    let n = pred.len() as f64;
    Ok(pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect())
}

fn check_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    Ok(())
}
