//! Multivariate Fourier projection on `[0,1]^K`.
//!
//! Coefficients follow `theta_k = int f(x) exp(-2 pi i k.x) dx`, approximated
//! by the rectangle rule on a uniform tensor grid (a sampled K-dimensional
//! DFT). Reconstruction uses `sum_k theta_k exp(+2 pi i k.x)`.

mod coeffs;
mod index;

pub use coeffs::{partial_sum_eval, CanonicalCoeffs, PartialSum};
pub use index::{FrequencyIndexSet, QuadratureGrid};

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::nn::Model;

/// Tolerance on `|theta_{-k} - conj(theta_k)|` for coefficients of real functions.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// `exp(-2 pi i p / q)` with the phase reduced modulo `q` first.
fn root_of_unity(p: i64, q: usize) -> Complex64 {
    let r = p.rem_euclid(q as i64) as f64 / q as f64;
    Complex64::from_polar(1.0, -TAU * r)
}

/// Precomputed quadrature weights mapping grid samples to coefficients.
#[derive(Debug, Clone)]
pub struct FourierProjector {
    index_set: FrequencyIndexSet,
    grid: QuadratureGrid,
    nodes: Vec<Vec<f64>>,
    /// Row-major `nodes x N`: `exp(-2 pi i k.x_node) / |grid|`.
    basis: Vec<Complex64>,
}

impl FourierProjector {
    pub fn new(index_set: &FrequencyIndexSet, grid: &QuadratureGrid) -> Result<Self> {
        grid.check_nyquist(index_set)?;
        let n = index_set.len();
        let g = grid.len();
        let weight = 1.0 / g as f64;
        let digits: Vec<Vec<usize>> = (0..n).map(|i| index_set.digits(i)).collect();
        let tables: Vec<Vec<Complex64>> = index_set
            .limits()
            .iter()
            .zip(grid.points_per_dim())
            .map(|(&lim, &gj)| {
                let width = 2 * lim + 1;
                let mut t = Vec::with_capacity(gj * width);
                for node in 0..gj {
                    for d in 0..width {
                        let k = d as i64 - lim as i64;
                        t.push(root_of_unity(k * node as i64, gj));
                    }
                }
                t
            })
            .collect();
        let mut basis = Vec::with_capacity(g * n);
        for node in 0..g {
            let ctr = grid.counters(node);
            for d in &digits {
                let mut z = Complex64::new(weight, 0.0);
                for j in 0..d.len() {
                    let width = 2 * index_set.limits()[j] + 1;
                    z *= tables[j][ctr[j] * width + d[j]];
                }
                basis.push(z);
            }
        }
        Ok(Self {
            index_set: index_set.clone(),
            grid: grid.clone(),
            nodes: grid.nodes(),
            basis,
        })
    }

    pub fn index_set(&self) -> &FrequencyIndexSet {
        &self.index_set
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    /// Coefficients of the function sampled as `values` on the grid nodes.
    pub fn project_samples(&self, values: &[f64]) -> Result<CanonicalCoeffs> {
        Ok(CanonicalCoeffs::from_parts(
            self.index_set.clone(),
            self.project_raw(values)?,
        ))
    }

    pub(crate) fn project_raw(&self, values: &[f64]) -> Result<Vec<Complex64>> {
        if values.len() != self.nodes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.nodes.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "function value at grid node {:?}",
                self.nodes[i]
            )));
        }
        let n = self.index_set.len();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (node, &v) in values.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let row = &self.basis[node * n..(node + 1) * n];
            for (acc, b) in out.iter_mut().zip(row) {
                *acc += b * v;
            }
        }
        Ok(out)
    }

    pub fn project<F>(&self, f: F) -> Result<CanonicalCoeffs>
    where
        F: Fn(&[f64]) -> f64,
    {
        let values: Vec<f64> = self.nodes.iter().map(|x| f(x)).collect();
        self.project_samples(&values)
    }
}

/// Rectangle-rule Fourier coefficients of `f` on `idx`.
pub fn fourier_coefficients<F>(
    f: F,
    idx: &FrequencyIndexSet,
    grid: &QuadratureGrid,
) -> Result<CanonicalCoeffs>
where
    F: Fn(&[f64]) -> f64,
{
    FourierProjector::new(idx, grid)?.project(f)
}

/// Coefficients of the function a model computes.
pub fn project_network<M: Model + ?Sized>(
    model: &M,
    idx: &FrequencyIndexSet,
    grid: &QuadratureGrid,
) -> Result<CanonicalCoeffs> {
    let proj = FourierProjector::new(idx, grid)?;
    project_model_with(model, &proj)
}

pub fn project_model_with<M: Model + ?Sized>(
    model: &M,
    proj: &FourierProjector,
) -> Result<CanonicalCoeffs> {
    if model.input_dim() != proj.index_set().dim() {
        return Err(Error::DimensionMismatch {
            expected: proj.index_set().dim(),
            got: model.input_dim(),
        });
    }
    let values = proj
        .nodes()
        .iter()
        .map(|x| model.forward(x))
        .collect::<Result<Vec<f64>>>()?;
    proj.project_samples(&values)
}

/// Rectangle-rule estimate of `int (f - f_hat)^2 dx` on `eval_grid`, which
/// must have at least twice the Nyquist minimum `2 N_j + 2` points per dimension.
pub fn truncation_error<F>(f: F, coeffs: &CanonicalCoeffs, eval_grid: &QuadratureGrid) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let idx = coeffs.index_set();
    if eval_grid.dim() != idx.dim() {
        return Err(Error::DimensionMismatch {
            expected: idx.dim(),
            got: eval_grid.dim(),
        });
    }
    for (dim, (&g, &n)) in eval_grid.points_per_dim().iter().zip(idx.limits()).enumerate() {
        let required = 2 * (2 * n + 2);
        if g < required {
            return Err(Error::GridTooCoarse {
                dim,
                points: g,
                required,
            });
        }
    }
    let mut acc = 0.0;
    for i in 0..eval_grid.len() {
        let x = eval_grid.node(i);
        let fx = f(&x);
        if !fx.is_finite() {
            return Err(Error::NonFinite(format!("function value at {x:?}")));
        }
        let r = fx - coeffs.eval(&x)?;
        acc += r * r;
    }
    Ok(acc / eval_grid.len() as f64)
}

/// Largest `|theta_k|` on each shell `max_j |k_j| = s`, for `s = 0, 1, ..`.
pub fn decay_profile(coeffs: &CanonicalCoeffs) -> Vec<(usize, f64)> {
    let idx = coeffs.index_set();
    let shells = idx.limits().iter().copied().max().unwrap_or(0);
    let mut best = vec![0.0f64; shells + 1];
    for (i, v) in coeffs.values().iter().enumerate() {
        let s = idx.shell(i);
        best[s] = best[s].max(v.norm());
    }
    best.into_iter().enumerate().collect()
}
