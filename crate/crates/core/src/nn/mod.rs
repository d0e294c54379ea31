//! Network evaluation, per-weight derivatives and degeneracy detection.

mod data;
mod degeneracy;
mod mlp;
mod trig;

pub use data::TrainingSet;
pub use degeneracy::{detect_dead_neurons, detect_duplicated_neurons, probe_grid, NeuronId, DEAD_RANGE_TOL};
pub use mlp::{format_f64_17, Activation, Architecture, ForwardTrace, MlpNetwork, WeightCoord};
pub use trig::TrigFeatureNet;

use crate::error::{Error, Result};

/// A scalar function on `[0,1]^K` parameterised by a flat weight vector,
/// with exact derivatives in every weight.
pub trait Model {
    fn input_dim(&self) -> usize;

    fn num_weights(&self) -> usize;

    fn forward(&self, x: &[f64]) -> Result<f64>;

    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;

    /// Adds `scale * d f(x) / d w` into `grad` and returns `f(x)`.
    fn accumulate_grad(&self, x: &[f64], scale: f64, grad: &mut [f64]) -> Result<f64> {
        let (v, g) = self.value_and_grad(x)?;
        for (acc, gi) in grad.iter_mut().zip(g) {
            *acc += scale * gi;
        }
        Ok(v)
    }

    fn grad_weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.value_and_grad(x)?.1)
    }

    /// Squared-error loss `Q = sum_t (y_t - f(x_t))^2` and its weight gradient.
    /// Samples are accumulated in order.
    fn loss_and_grad(&self, data: &TrainingSet) -> Result<(f64, Vec<f64>)> {
        let all: Vec<usize> = (0..data.len()).collect();
        self.subset_loss_and_grad(data, &all)
    }

    /// Loss and gradient restricted to the samples in `indices`.
    fn subset_loss_and_grad(&self, data: &TrainingSet, indices: &[usize]) -> Result<(f64, Vec<f64>)> {
        if data.is_empty() || indices.is_empty() {
            return Err(Error::EmptyData);
        }
        let mut grad = vec![0.0; self.num_weights()];
        let mut loss = 0.0;
        for &t in indices {
            let (x, y) = data.sample(t);
            let (f, g) = self.value_and_grad(x)?;
            let r = f - y;
            loss += r * r;
            for (acc, gi) in grad.iter_mut().zip(g) {
                *acc += 2.0 * r * gi;
            }
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        Ok((loss, grad))
    }

    fn loss(&self, data: &TrainingSet) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        let mut loss = 0.0;
        for (x, y) in data.iter() {
            let r = self.forward(x)? - y;
            loss += r * r;
        }
        Ok(loss)
    }
}

pub(crate) fn check_point(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::OutOfDomain(x.to_vec()));
    }
    Ok(())
}
