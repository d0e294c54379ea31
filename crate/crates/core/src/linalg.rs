//! Thin wrappers over nalgebra's complex SVD.

use nalgebra::{DMatrix, DVector, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

const MAX_SVD_ITERS: usize = 100_000;

pub(crate) fn matrix_from_rows(rows: usize, cols: usize, data: &[Complex64]) -> DMatrix<Complex64> {
    DMatrix::from_row_slice(rows, cols, data)
}

fn svd(m: DMatrix<Complex64>, vectors: bool) -> Result<SVD<Complex64, nalgebra::Dyn, nalgebra::Dyn>> {
    let (rows, cols) = m.shape();
    SVD::try_new(m, vectors, vectors, f64::EPSILON, MAX_SVD_ITERS)
        .ok_or(Error::SvdNonConvergence { rows, cols })
}

/// All `min(rows, cols)` singular values, sorted non-increasing.
pub fn singular_values(m: DMatrix<Complex64>) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let mut s: Vec<f64> = svd(m, false)?.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

const REFINEMENT_ROUNDS: usize = 3;

/// Minimum-norm least-squares solution `A^+ b`, together with the singular
/// values of `A` (non-increasing). Singular values at or below
/// `eps * sigma_max * max(rows, cols)` are treated as zero.
///
/// nalgebra's complex SVD can reconstruct `A` with errors well above machine
/// precision, so the solve is followed by a few rounds of iterative
/// refinement `x += A^+ (b - A x)`. Corrections lie in the row space, so the
/// result stays minimum-norm.
pub fn pinv_solve(a: DMatrix<Complex64>, b: &[Complex64]) -> Result<(Vec<Complex64>, Vec<f64>)> {
    let (rows, cols) = a.shape();
    let dec = svd(a.clone(), true)?;
    let u = dec.u.as_ref().ok_or(Error::SvdNonConvergence { rows, cols })?;
    let v_t = dec.v_t.as_ref().ok_or(Error::SvdNonConvergence { rows, cols })?;
    let sigma = &dec.singular_values;
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    let cutoff = f64::EPSILON * smax * rows.max(cols) as f64;
    let apply = |rhs: &DVector<Complex64>| {
        let mut x = DVector::<Complex64>::zeros(cols);
        for i in 0..sigma.len() {
            if sigma[i] <= cutoff {
                continue;
            }
            let coef = u.column(i).dotc(rhs) / sigma[i];
            // row i of V^H is the conjugate of the i-th right singular vector
            for j in 0..cols {
                x[j] += v_t[(i, j)].conj() * coef;
            }
        }
        x
    };
    let rhs = DVector::from_column_slice(b);
    let mut x = apply(&rhs);
    let mut res = &rhs - &a * &x;
    for _ in 0..REFINEMENT_ROUNDS {
        let next = &x + apply(&res);
        let next_res = &rhs - &a * &next;
        if next_res.norm() >= res.norm() {
            break;
        }
        x = next;
        res = next_res;
    }
    let mut s: Vec<f64> = sigma.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok((x.iter().copied().collect(), s))
}
