//! Dense feed-forward networks with a scalar linear output.
//!
//! Weights live in one flat vector. Layer `l` maps `dims[l] -> dims[l+1]`
//! where `dims = [K, h_1, .., h_L, 1]`; its block holds the `fan_out x fan_in`
//! weight matrix in row-major order (row = receiving unit) followed by the
//! `fan_out` biases. This ordering is what aligns the rows of a disparity
//! matrix with individual weights, so it must never change.

use serde::{Deserialize, Serialize};

use super::{check_point, Model};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed through the pre-activation `z` and the output
    /// `a = apply(z)`. ReLU uses the one-sided subgradient 0 at `z == 0`.
    #[inline]
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::InvalidArchitecture(format!(
                "unknown activation {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub activation: Activation,
}

impl Architecture {
    pub fn new(input_dim: usize, hidden_sizes: Vec<usize>, activation: Activation) -> Result<Self> {
        let arch = Self {
            input_dim,
            hidden_sizes,
            activation,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidArchitecture("input_dim must be positive".into()));
        }
        if self.hidden_sizes.iter().any(|&h| h == 0) {
            return Err(Error::InvalidArchitecture(
                "hidden layer sizes must be positive".into(),
            ));
        }
        Ok(())
    }

    /// `[K, h_1, .., h_L, 1]`
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_sizes.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_sizes);
        dims.push(1);
        dims
    }

    pub fn num_weights(&self) -> usize {
        self.dims().windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    pub fn num_layers(&self) -> usize {
        self.hidden_sizes.len() + 1
    }
}

/// Where a flat weight index points inside the architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightCoord {
    Weight { layer: usize, row: usize, col: usize },
    Bias { layer: usize, row: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    arch: Architecture,
    dims: Vec<usize>,
    offsets: Vec<usize>,
    weights: Vec<f64>,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Pre-activations of each hidden layer.
    pub pre: Vec<Vec<f64>>,
    /// Post-activations of each hidden layer.
    pub post: Vec<Vec<f64>>,
    pub output: f64,
}

impl MlpNetwork {
    pub fn new(arch: Architecture, weights: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        let dims = arch.dims();
        let expected = arch.num_weights();
        if weights.len() != expected {
            return Err(Error::WeightCount {
                expected,
                got: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite(format!("weight {i}")));
        }
        let mut offsets = Vec::with_capacity(dims.len());
        let mut off = 0;
        for w in dims.windows(2) {
            offsets.push(off);
            off += (w[0] + 1) * w[1];
        }
        Ok(Self {
            arch,
            dims,
            offsets,
            weights,
        })
    }

    pub fn zeros(arch: Architecture) -> Result<Self> {
        let m = arch.num_weights();
        Self::new(arch, vec![0.0; m])
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn activation(&self) -> Activation {
        self.arch.activation
    }

    pub fn hidden_sizes(&self) -> &[usize] {
        &self.arch.hidden_sizes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Replaces the weight vector, rejecting wrong lengths and non-finite values.
    pub fn set_weights(&mut self, weights: Vec<f64>) -> Result<()> {
        if weights.len() != self.weights.len() {
            return Err(Error::WeightCount {
                expected: self.weights.len(),
                got: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite(format!("weight {i}")));
        }
        self.weights = weights;
        Ok(())
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        let mut out = self.clone();
        out.set_weights(weights)?;
        Ok(out)
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn layer_fan_in(&self, layer: usize) -> usize {
        self.dims[layer]
    }

    pub fn layer_fan_out(&self, layer: usize) -> usize {
        self.dims[layer + 1]
    }

    pub fn weight_index(&self, layer: usize, row: usize, col: usize) -> usize {
        debug_assert!(row < self.dims[layer + 1] && col < self.dims[layer]);
        self.offsets[layer] + row * self.dims[layer] + col
    }

    pub fn bias_index(&self, layer: usize, row: usize) -> usize {
        debug_assert!(row < self.dims[layer + 1]);
        self.offsets[layer] + self.dims[layer] * self.dims[layer + 1] + row
    }

    pub fn coord(&self, m: usize) -> Option<WeightCoord> {
        if m >= self.weights.len() {
            return None;
        }
        let layer = self.offsets.iter().rposition(|&o| o <= m)?;
        let local = m - self.offsets[layer];
        let (fan_in, fan_out) = (self.dims[layer], self.dims[layer + 1]);
        if local < fan_in * fan_out {
            Some(WeightCoord::Weight {
                layer,
                row: local / fan_in,
                col: local % fan_in,
            })
        } else {
            Some(WeightCoord::Bias {
                layer,
                row: local - fan_in * fan_out,
            })
        }
    }

    pub fn trace(&self, x: &[f64]) -> Result<ForwardTrace> {
        check_point(x, self.arch.input_dim)?;
        Ok(self.trace_unchecked(x))
    }

    fn trace_unchecked(&self, x: &[f64]) -> ForwardTrace {
        let act = self.arch.activation;
        let n_hidden = self.arch.hidden_sizes.len();
        let mut pre = Vec::with_capacity(n_hidden);
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(n_hidden);
        let mut output = 0.0;
        for layer in 0..self.num_layers() {
            let input: &[f64] = if layer == 0 { x } else { &post[layer - 1] };
            let z = self.affine(layer, input);
            if layer == n_hidden {
                output = z[0];
            } else {
                post.push(z.iter().map(|&v| act.apply(v)).collect());
                pre.push(z);
            }
        }
        ForwardTrace { pre, post, output }
    }

    fn affine(&self, layer: usize, input: &[f64]) -> Vec<f64> {
        let fan_in = self.dims[layer];
        let fan_out = self.dims[layer + 1];
        let w = &self.weights[self.offsets[layer]..];
        let bias = &w[fan_in * fan_out..];
        (0..fan_out)
            .map(|r| {
                let row = &w[r * fan_in..(r + 1) * fan_in];
                row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>() + bias[r]
            })
            .collect()
    }

    fn backprop(&self, x: &[f64], tr: &ForwardTrace, scale: f64, grad: &mut [f64]) {
        let act = self.arch.activation;
        let last = self.num_layers() - 1;
        // d output / d pre-activation of the layer being processed
        let mut delta = vec![scale];
        for layer in (0..=last).rev() {
            let fan_in = self.dims[layer];
            let fan_out = self.dims[layer + 1];
            let input: &[f64] = if layer == 0 { x } else { &tr.post[layer - 1] };
            let off = self.offsets[layer];
            for r in 0..fan_out {
                let d = delta[r];
                let row = &mut grad[off + r * fan_in..off + (r + 1) * fan_in];
                for (g, &a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
                grad[off + fan_in * fan_out + r] += d;
            }
            if layer == 0 {
                break;
            }
            let w = &self.weights[off..off + fan_in * fan_out];
            let (z, a) = (&tr.pre[layer - 1], &tr.post[layer - 1]);
            delta = (0..fan_in)
                .map(|c| {
                    let back: f64 = (0..fan_out).map(|r| w[r * fan_in + c] * delta[r]).sum();
                    back * act.derivative(z[c], a[c])
                })
                .collect();
        }
    }

    /// Largest absolute value any unit of hidden layer `layer` can take on
    /// `[0,1]^K`, by interval propagation.
    pub fn hidden_output_bound(&self, layer: usize) -> f64 {
        let mut bound = 1.0;
        for l in 0..=layer {
            let fan_in = self.dims[l];
            let fan_out = self.dims[l + 1];
            let mut worst: f64 = 0.0;
            for r in 0..fan_out {
                let row_abs: f64 = (0..fan_in)
                    .map(|c| self.weights[self.weight_index(l, r, c)].abs())
                    .sum();
                let b = self.weights[self.bias_index(l, r)].abs();
                worst = worst.max(row_abs * bound + b);
            }
            bound = match self.arch.activation {
                Activation::Relu => worst,
                Activation::Tanh | Activation::Sigmoid => 1.0,
            };
        }
        bound
    }

    pub fn to_json(&self) -> String {
        let hidden = self
            .arch
            .hidden_sizes
            .iter()
            .map(|h| h.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let weights = self
            .weights
            .iter()
            .map(|w| format_f64_17(*w))
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "{{\"input_dim\":{},\"hidden_sizes\":[{}],\"activation\":\"{}\",\"weights\":[{}]}}",
            self.arch.input_dim,
            hidden,
            self.arch.activation.name(),
            weights
        )
    }

    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            input_dim: usize,
            hidden_sizes: Vec<usize>,
            activation: Activation,
            weights: Vec<f64>,
        }
        let doc: Doc = serde_json::from_str(s)?;
        Self::new(
            Architecture {
                input_dim: doc.input_dim,
                hidden_sizes: doc.hidden_sizes,
                activation: doc.activation,
            },
            doc.weights,
        )
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// 17 significant digits, enough to round-trip any finite double.
pub fn format_f64_17(v: f64) -> String {
    format!("{v:.16e}")
}

impl Model for MlpNetwork {
    fn input_dim(&self) -> usize {
        self.arch.input_dim
    }

    fn num_weights(&self) -> usize {
        self.weights.len()
    }

    fn forward(&self, x: &[f64]) -> Result<f64> {
        Ok(self.trace(x)?.output)
    }

    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let tr = self.trace(x)?;
        let mut grad = vec![0.0; self.weights.len()];
        self.backprop(x, &tr, 1.0, &mut grad);
        Ok((tr.output, grad))
    }

    fn accumulate_grad(&self, x: &[f64], scale: f64, grad: &mut [f64]) -> Result<f64> {
        let tr = self.trace(x)?;
        self.backprop(x, &tr, scale, grad);
        Ok(tr.output)
    }
}
