//! Learning directly in the canonical space, where the squared loss is a
//! convex quadratic in the Fourier coefficients.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{CanonicalCoeffs, FrequencyIndexSet};
use crate::linalg;
use crate::nn::TrainingSet;

/// Condition number above which an interpolation solve is flagged.
pub const ILL_CONDITIONED: f64 = 1e8;

/// Additive slack allowed by [`convexity_probe`].
pub const CONVEXITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    MinNormDirect,
    GradientDescent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalFitResult {
    pub coeffs: CanonicalCoeffs,
    pub final_loss: f64,
    pub iterations: usize,
    pub solver: SolverKind,
    /// `sigma_max / sigma_min` of the `T x N` system (direct solves only).
    pub condition_number: Option<f64>,
    pub ill_conditioned: bool,
    /// Loss before the first step and after every step (descent only).
    pub losses: Vec<f64>,
}

impl CanonicalFitResult {
    pub fn summary_json(&self, coeffs_file: &str) -> String {
        let doc = serde_json::json!({
            "solver": self.solver,
            "final_loss": self.final_loss,
            "iterations": self.iterations,
            "coeffs_file": coeffs_file,
            "condition_number": self.condition_number,
            "ill_conditioned": self.ill_conditioned,
        });
        serde_json::to_string_pretty(&doc).expect("fit summary serializes")
    }
}

/// Row `t` holds `exp(2 pi i k.x_t)` for every enumerated `k`.
fn system_rows(data: &TrainingSet, idx: &FrequencyIndexSet) -> Result<Vec<Vec<Complex64>>> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if data.dim() != idx.dim() {
        return Err(Error::DimensionMismatch {
            expected: idx.dim(),
            got: data.dim(),
        });
    }
    Ok(data
        .inputs()
        .iter()
        .map(|x| CanonicalCoeffs::basis_at(idx, x))
        .collect())
}

fn system_matrix(rows: &[Vec<Complex64>]) -> DMatrix<Complex64> {
    let flat: Vec<Complex64> = rows.iter().flatten().copied().collect();
    linalg::matrix_from_rows(rows.len(), rows[0].len(), &flat)
}

fn predictions(rows: &[Vec<Complex64>], theta: &[Complex64]) -> Vec<f64> {
    rows.iter()
        .map(|r| r.iter().zip(theta).map(|(e, t)| (e * t).re).sum())
        .collect()
}

fn sq_loss(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, y)| (p - y) * (p - y)).sum()
}

/// `Q(theta) = sum_t (y_t - Re sum_k theta_k exp(2 pi i k.x_t))^2`
pub fn canonical_loss(coeffs: &CanonicalCoeffs, data: &TrainingSet) -> Result<f64> {
    let rows = system_rows(data, coeffs.index_set())?;
    Ok(sq_loss(&predictions(&rows, coeffs.values()), data.targets()))
}

/// Minimum-norm zero-loss interpolant through the pseudoinverse. Requires
/// `N >= T` and distinct inputs; a square system must be well conditioned.
pub fn solve_zero_loss(data: &TrainingSet, idx: &FrequencyIndexSet) -> Result<CanonicalFitResult> {
    let n = idx.len();
    let t = data.len();
    if n < t {
        return Err(Error::Underdetermined { n, t });
    }
    let rows = system_rows(data, idx)?;
    let rhs: Vec<Complex64> = data.targets().iter().map(|&y| Complex64::new(y, 0.0)).collect();
    let (theta, sigma) = linalg::pinv_solve(system_matrix(&rows), &rhs)?;
    let smax = sigma.first().copied().unwrap_or(0.0);
    let smin = sigma.last().copied().unwrap_or(0.0);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if n == t && condition > ILL_CONDITIONED {
        return Err(Error::SingularSystem { condition });
    }
    let mut coeffs = CanonicalCoeffs::new(idx.clone(), theta)?;
    coeffs.symmetrize();
    let final_loss = sq_loss(&predictions(&rows, coeffs.values()), data.targets());
    Ok(CanonicalFitResult {
        coeffs,
        final_loss,
        iterations: 1,
        solver: SolverKind::MinNormDirect,
        condition_number: Some(condition),
        ill_conditioned: condition > ILL_CONDITIONED,
        losses: Vec::new(),
    })
}

/// Upper bound `2 sigma_max^2` on the curvature of the loss in the
/// real-stacked coordinates `(Re theta, Im theta)`.
pub fn lipschitz_constant(data: &TrainingSet, idx: &FrequencyIndexSet) -> Result<f64> {
    let rows = system_rows(data, idx)?;
    let sigma = linalg::singular_values(system_matrix(&rows))?;
    let smax = sigma.first().copied().unwrap_or(0.0);
    Ok(2.0 * smax * smax)
}

pub fn convex_gd(data: &TrainingSet, idx: &FrequencyIndexSet, steps: usize, lr: f64) -> Result<CanonicalFitResult> {
    convex_gd_from(data, &CanonicalCoeffs::zeros(idx.clone()), steps, lr)
}

/// Full-batch gradient descent on `(Re theta, Im theta)` with Hermitian
/// symmetry re-imposed after every step. The step must satisfy `lr < 1/L`,
/// under which the loss never increases; an increase is reported as an error.
pub fn convex_gd_from(
    data: &TrainingSet,
    start: &CanonicalCoeffs,
    steps: usize,
    lr: f64,
) -> Result<CanonicalFitResult> {
    let idx = start.index_set();
    let rows = system_rows(data, idx)?;
    let sigma = linalg::singular_values(system_matrix(&rows))?;
    let smax = sigma.first().copied().unwrap_or(0.0);
    let limit = if smax > 0.0 { 1.0 / (2.0 * smax * smax) } else { f64::INFINITY };
    if !(lr > 0.0 && lr < limit) {
        return Err(Error::LearningRate { lr, limit });
    }
    let y = data.targets();
    let y_scale = 1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut coeffs = start.clone();
    coeffs.symmetrize();
    let mut theta = coeffs.into_values();
    let mut pred = predictions(&rows, &theta);
    let mut loss = sq_loss(&pred, y);
    let mut losses = Vec::with_capacity(steps + 1);
    losses.push(loss);
    let n = idx.len();
    for step in 0..steps {
        // d Q / d(Re theta_k) + i d Q / d(Im theta_k) = conj(g_k)
        let mut grad = vec![Complex64::new(0.0, 0.0); n];
        for (r, (p, yt)) in rows.iter().zip(pred.iter().zip(y)) {
            let res = 2.0 * (p - yt);
            for (g, e) in grad.iter_mut().zip(r) {
                *g += e.conj() * res;
            }
        }
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= g * lr;
        }
        for i in 0..=n / 2 {
            let j = n - 1 - i;
            let avg = (theta[i] + theta[j].conj()) * 0.5;
            theta[i] = avg;
            theta[j] = avg.conj();
        }
        pred = predictions(&rows, &theta);
        let next = sq_loss(&pred, y);
        // rounding noise of the residual evaluation
        let slack = 8.0 * f64::EPSILON * rows.len() as f64 * n as f64 * y_scale * (loss.sqrt() + f64::EPSILON);
        if !next.is_finite() || next > loss + slack {
            return Err(Error::DescentViolation {
                step,
                before: loss,
                after: next,
            });
        }
        loss = next;
        losses.push(loss);
    }
    Ok(CanonicalFitResult {
        coeffs: CanonicalCoeffs::new(idx.clone(), theta)?,
        final_loss: loss,
        iterations: steps,
        solver: SolverKind::GradientDescent,
        condition_number: None,
        ill_conditioned: false,
        losses,
    })
}

/// Checks `Q(l a + (1-l) b) <= l Q(a) + (1-l) Q(b) + 1e-9` for each `l`.
pub fn convexity_probe(
    first: &CanonicalCoeffs,
    second: &CanonicalCoeffs,
    data: &TrainingSet,
    lambdas: &[f64],
) -> Result<bool> {
    if first.index_set() != second.index_set() {
        return Err(Error::IndexSetMismatch);
    }
    if let Some(l) = lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::Config(format!("lambda {l} outside [0, 1]")));
    }
    let q1 = canonical_loss(first, data)?;
    let q2 = canonical_loss(second, data)?;
    for &l in lambdas {
        let mix = first.combine(l, second, 1.0 - l)?;
        if canonical_loss(&mix, data)? > l * q1 + (1.0 - l) * q2 + CONVEXITY_SLACK {
            return Ok(false);
        }
    }
    Ok(true)
}
