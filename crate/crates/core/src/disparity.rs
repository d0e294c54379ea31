//! The disparity matrix `H(w)`: row `m` holds the truncated Fourier
//! coefficients of `x -> d f_w(x) / d w_m`. It links the two gradients through
//! `grad_w Q = H(w) grad_theta Q`, and its rank decides what a stationary
//! point of the literal loss can be.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{project_model_with, CanonicalCoeffs, FourierProjector, FrequencyIndexSet, QuadratureGrid};
use crate::linalg;
use crate::nn::{Model, TrainingSet};

/// Default relative threshold for numerical rank.
pub const DEFAULT_RANK_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMatrix {
    rows: usize,
    cols: usize,
    /// Row-major `M x N`.
    data: Vec<Complex64>,
    index_set: FrequencyIndexSet,
    grid: QuadratureGrid,
}

impl DisparityMatrix {
    pub fn from_rows(
        rows: usize,
        data: Vec<Complex64>,
        index_set: FrequencyIndexSet,
        grid: QuadratureGrid,
    ) -> Result<Self> {
        let cols = index_set.len();
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("disparity entry".into()));
        }
        Ok(Self {
            rows,
            cols,
            data,
            index_set,
            grid,
        })
    }

    /// `M`, the number of weights.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// `N`, the number of retained frequencies.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn index_set(&self) -> &FrequencyIndexSet {
        &self.index_set
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn row(&self, m: usize) -> &[Complex64] {
        &self.data[m * self.cols..(m + 1) * self.cols]
    }

    pub fn row_mut(&mut self, m: usize) -> &mut [Complex64] {
        &mut self.data[m * self.cols..(m + 1) * self.cols]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `H v`
    pub fn mul_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: v.len(),
            });
        }
        Ok((0..self.rows)
            .map(|m| self.row(m).iter().zip(v).map(|(h, g)| h * g).sum())
            .collect())
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        linalg::matrix_from_rows(self.rows, self.cols, &self.data)
    }

    /// CSV with header `m,k_1,..,k_K,re,im`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["m".to_string()];
        header.extend((1..=self.index_set.dim()).map(|j| format!("k_{j}")));
        header.push("re".into());
        header.push("im".into());
        w.write_record(&header)?;
        let tuples: Vec<Vec<i64>> = self.index_set.iter().collect();
        for m in 0..self.rows {
            for (k, z) in tuples.iter().zip(self.row(m)) {
                let mut rec = vec![m.to_string()];
                rec.extend(k.iter().map(|v| v.to_string()));
                rec.push(z.re.to_string());
                rec.push(z.im.to_string());
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn build_disparity<M: Model + Sync + ?Sized>(
    model: &M,
    idx: &FrequencyIndexSet,
    grid: &QuadratureGrid,
) -> Result<DisparityMatrix> {
    let proj = FourierProjector::new(idx, grid)?;
    build_disparity_with(model, &proj)
}

/// Builds `H(w)` with one gradient sweep per grid node, reused across all rows.
pub fn build_disparity_with<M: Model + Sync + ?Sized>(
    model: &M,
    proj: &FourierProjector,
) -> Result<DisparityMatrix> {
    if model.input_dim() != proj.index_set().dim() {
        return Err(Error::DimensionMismatch {
            expected: proj.index_set().dim(),
            got: model.input_dim(),
        });
    }
    let m = model.num_weights();
    let g = proj.nodes().len();
    let per_node: Vec<Vec<f64>> = proj
        .nodes()
        .par_iter()
        .map(|x| model.grad_weights(x))
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<Complex64>> = (0..m)
        .into_par_iter()
        .map(|w| {
            let samples: Vec<f64> = (0..g).map(|node| per_node[node][w]).collect();
            proj.project_raw(&samples)
        })
        .collect::<Result<_>>()?;
    DisparityMatrix::from_rows(
        m,
        rows.into_iter().flatten().collect(),
        proj.index_set().clone(),
        proj.grid().clone(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub singular_values: Vec<f64>,
    pub numerical_rank: usize,
    pub tolerance_used: f64,
    pub sigma_min_over_sigma_max: f64,
    pub rows: usize,
    pub cols: usize,
}

impl RankReport {
    /// Rank equal to the column count `N`.
    pub fn is_full(&self) -> bool {
        self.numerical_rank == self.cols
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rank report serializes")
    }
}

/// Numerical rank of any complex matrix with threshold
/// `rel_tol * sigma_max * max(rows, cols)`.
pub fn rank_report(matrix: DMatrix<Complex64>, rel_tol: f64) -> Result<RankReport> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::Config(format!("rank tolerance must lie in (0, 1), got {rel_tol}")));
    }
    let (rows, cols) = matrix.shape();
    let singular_values = linalg::singular_values(matrix)?;
    let smax = singular_values.first().copied().unwrap_or(0.0);
    let smin = singular_values.last().copied().unwrap_or(0.0);
    let tolerance_used = rel_tol * smax * rows.max(cols) as f64;
    let numerical_rank = singular_values.iter().filter(|&&s| s > tolerance_used).count();
    Ok(RankReport {
        numerical_rank,
        tolerance_used,
        sigma_min_over_sigma_max: if smax > 0.0 { smin / smax } else { 0.0 },
        singular_values,
        rows,
        cols,
    })
}

pub fn numerical_rank(h: &DisparityMatrix, rel_tol: f64) -> Result<RankReport> {
    rank_report(h.to_matrix(), rel_tol)
}

/// `g_k = sum_t 2 (y_hat_t - y_t) exp(2 pi i k.x_t)`, the derivative of the
/// squared loss with each `theta_k` treated as an independent coordinate.
pub fn canonical_gradient(coeffs: &CanonicalCoeffs, data: &TrainingSet) -> Result<Vec<Complex64>> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let idx = coeffs.index_set();
    if data.dim() != idx.dim() {
        return Err(Error::DimensionMismatch {
            expected: idx.dim(),
            got: data.dim(),
        });
    }
    let mut g = vec![Complex64::new(0.0, 0.0); idx.len()];
    for (x, y) in data.iter() {
        let eta = CanonicalCoeffs::basis_at(idx, x);
        let y_hat: f64 = eta.iter().zip(coeffs.values()).map(|(e, t)| (e * t).re).sum();
        let r = 2.0 * (y_hat - y);
        for (acc, e) in g.iter_mut().zip(&eta) {
            *acc += e * r;
        }
    }
    Ok(g)
}

pub fn complex_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn real_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainRuleResidual {
    /// `||grad_w Q - Re(H g)|| / max(||grad_w Q||, 1e-15)`
    pub rel_residual: f64,
    /// `||Im(H g)|| / max(||grad_w Q||, 1e-15)`
    pub imag_residue: f64,
}

/// Compares the literal gradient with `H(w)` times the canonical gradient
/// of the projected network.
pub fn chain_rule_residual<M: Model + ?Sized>(
    model: &M,
    data: &TrainingSet,
    h: &DisparityMatrix,
) -> Result<ChainRuleResidual> {
    let proj = FourierProjector::new(h.index_set(), h.grid())?;
    let theta = project_model_with(model, &proj)?;
    let (_, g_lit) = model.loss_and_grad(data)?;
    chain_rule_residual_parts(&g_lit, &theta, data, h)
}

pub(crate) fn chain_rule_residual_parts(
    g_lit: &[f64],
    theta: &CanonicalCoeffs,
    data: &TrainingSet,
    h: &DisparityMatrix,
) -> Result<ChainRuleResidual> {
    if g_lit.len() != h.rows() {
        return Err(Error::DimensionMismatch {
            expected: h.rows(),
            got: g_lit.len(),
        });
    }
    let g_can = canonical_gradient(theta, data)?;
    let hg = h.mul_vec(&g_can)?;
    let denom = real_norm(g_lit).max(1e-15);
    let resid: f64 = g_lit
        .iter()
        .zip(&hg)
        .map(|(l, z)| (l - z.re).powi(2))
        .sum::<f64>()
        .sqrt();
    let imag: f64 = hg.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
    Ok(ChainRuleResidual {
        rel_residual: resid / denom,
        imag_residue: imag / denom,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    GlobalMinimumCertificate,
    NotStationary,
    IndeterminateRankDeficient,
    NonGlobalStationary,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::GlobalMinimumCertificate => "global_minimum_certificate",
            Verdict::NotStationary => "not_stationary",
            Verdict::IndeterminateRankDeficient => "indeterminate_rank_deficient",
            Verdict::NonGlobalStationary => "non_global_stationary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryClassification {
    pub loss: f64,
    pub literal_grad_norm: f64,
    pub canonical_grad_norm: f64,
    pub rank_report: RankReport,
    pub verdict: Verdict,
}

/// Decision table over the literal gradient norm, the rank of `H` and the
/// canonical gradient norm:
///
/// | literal > tol | full rank | canonical <= tol | verdict |
/// |---|---|---|---|
/// | yes | - | - | not stationary |
/// | no | yes | - | global minimum certificate |
/// | no | no | yes | global minimum certificate |
/// | no | no | no | non-global stationary |
///
/// Anything the table cannot order (a NaN norm) is indeterminate.
pub fn decide(literal_grad_norm: f64, full_rank: bool, canonical_grad_norm: f64, grad_tol: f64) -> Verdict {
    if literal_grad_norm > grad_tol {
        Verdict::NotStationary
    } else if literal_grad_norm.is_nan() {
        Verdict::IndeterminateRankDeficient
    } else if full_rank || canonical_grad_norm <= grad_tol {
        Verdict::GlobalMinimumCertificate
    } else if canonical_grad_norm > grad_tol {
        Verdict::NonGlobalStationary
    } else {
        Verdict::IndeterminateRankDeficient
    }
}

pub fn classify_stationary_point<M: Model + ?Sized>(
    model: &M,
    data: &TrainingSet,
    h: &DisparityMatrix,
    grad_tol: f64,
    rank_tol: f64,
) -> Result<StationaryClassification> {
    if !(grad_tol > 0.0) || !(rank_tol > 0.0) {
        return Err(Error::Config("classification tolerances must be positive".into()));
    }
    let (loss, g_lit) = model.loss_and_grad(data)?;
    let proj = FourierProjector::new(h.index_set(), h.grid())?;
    let theta = project_model_with(model, &proj)?;
    let g_can = canonical_gradient(&theta, data)?;
    let rank_report = numerical_rank(h, rank_tol)?;
    let literal_grad_norm = real_norm(&g_lit);
    let canonical_grad_norm = complex_norm(&g_can);
    let verdict = decide(literal_grad_norm, rank_report.is_full(), canonical_grad_norm, grad_tol);
    Ok(StationaryClassification {
        loss,
        literal_grad_norm,
        canonical_grad_norm,
        rank_report,
        verdict,
    })
}
