use std::f64::consts::TAU;

use super::{check_point, Model};
use crate::error::{Error, Result};

/// A network whose first layer is a fixed bank of `cos(2 pi k.x)` and
/// `sin(2 pi k.x)` features, followed by a trainable linear readout.
///
/// Both the function and every weight derivative are trigonometric
/// polynomials of bandwidth `max |k_j|`, so Fourier projections onto any
/// index set covering that bandwidth are exact.
///
/// Weight layout: `[a_1..a_F, b_1..b_F, bias]` for `F` frequencies with
/// `f(x) = bias + sum_j a_j cos(2 pi k_j.x) + b_j sin(2 pi k_j.x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigFeatureNet {
    input_dim: usize,
    frequencies: Vec<Vec<i64>>,
    weights: Vec<f64>,
}

impl TrigFeatureNet {
    pub fn new(input_dim: usize, frequencies: Vec<Vec<i64>>, weights: Vec<f64>) -> Result<Self> {
        if frequencies.iter().any(|k| k.len() != input_dim) {
            return Err(Error::InvalidArchitecture(
                "frequency tuple length differs from input_dim".into(),
            ));
        }
        let m = 2 * frequencies.len() + 1;
        if weights.len() != m {
            return Err(Error::WeightCount {
                expected: m,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("weights".into()));
        }
        Ok(Self {
            input_dim,
            frequencies,
            weights,
        })
    }

    pub fn bandwidth(&self) -> Vec<usize> {
        (0..self.input_dim)
            .map(|j| {
                self.frequencies
                    .iter()
                    .map(|k| k[j].unsigned_abs() as usize)
                    .max()
                    .unwrap_or(0)
            })
            .collect()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn features(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.frequencies
            .iter()
            .map(|k| {
                let phase = TAU * k.iter().zip(x).map(|(&kj, xj)| kj as f64 * xj).sum::<f64>();
                (phase.cos(), phase.sin())
            })
            .unzip()
    }
}

impl Model for TrigFeatureNet {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn num_weights(&self) -> usize {
        self.weights.len()
    }

    fn forward(&self, x: &[f64]) -> Result<f64> {
        Ok(self.value_and_grad(x)?.0)
    }

    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_point(x, self.input_dim)?;
        let (c, s) = self.features(x);
        let f = self.frequencies.len();
        let mut grad = Vec::with_capacity(2 * f + 1);
        grad.extend_from_slice(&c);
        grad.extend_from_slice(&s);
        grad.push(1.0);
        let value = grad.iter().zip(&self.weights).map(|(g, w)| g * w).sum();
        Ok((value, grad))
    }
}
