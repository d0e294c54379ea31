use std::f64::consts::TAU;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use super::FrequencyIndexSet;
use crate::error::{Error, Result};
use crate::nn::check_point;

/// Truncated Fourier coefficients aligned with an index-set enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalCoeffs {
    index_set: FrequencyIndexSet,
    values: Vec<Complex64>,
}

/// Real part of a partial sum together with the discarded imaginary part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialSum {
    pub value: f64,
    pub imag_residue: f64,
}

impl CanonicalCoeffs {
    pub fn new(index_set: FrequencyIndexSet, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != index_set.len() {
            return Err(Error::DimensionMismatch {
                expected: index_set.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("coefficient".into()));
        }
        Ok(Self { index_set, values })
    }

    pub(crate) fn from_parts(index_set: FrequencyIndexSet, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(index_set.len(), values.len());
        Self { index_set, values }
    }

    pub fn zeros(index_set: FrequencyIndexSet) -> Self {
        let n = index_set.len();
        Self {
            index_set,
            values: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn index_set(&self) -> &FrequencyIndexSet {
        &self.index_set
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn get(&self, k: &[i64]) -> Option<Complex64> {
        self.index_set.index_of(k).map(|i| self.values[i])
    }

    /// `max_k |theta_{-k} - conj(theta_k)|`
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.values.len())
            .map(|i| (self.values[self.index_set.negated(i)] - self.values[i].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Projects onto Hermitian-symmetric coefficients, i.e. real functions.
    pub fn symmetrize(&mut self) {
        let n = self.values.len();
        for i in 0..=n / 2 {
            let j = self.index_set.negated(i);
            let avg = (self.values[i] + self.values[j].conj()) * 0.5;
            self.values[i] = avg;
            self.values[j] = avg.conj();
        }
    }

    /// `a * self + b * other`
    pub fn combine(&self, a: f64, other: &CanonicalCoeffs, b: f64) -> Result<CanonicalCoeffs> {
        if self.index_set != other.index_set {
            return Err(Error::IndexSetMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(p, q)| p * a + q * b)
            .collect();
        Ok(Self::from_parts(self.index_set.clone(), values))
    }

    /// `exp(2 pi i k.x)` for every enumerated `k`.
    pub fn basis_at(index_set: &FrequencyIndexSet, x: &[f64]) -> Vec<Complex64> {
        let per_dim: Vec<Vec<Complex64>> = index_set
            .limits()
            .iter()
            .zip(x)
            .map(|(&n, &xj)| {
                (-(n as i64)..=n as i64)
                    .map(|k| {
                        // reduce the phase to [0,1) turns before scaling by 2 pi
                        let turns = (k as f64 * xj).rem_euclid(1.0);
                        Complex64::from_polar(1.0, TAU * turns)
                    })
                    .collect()
            })
            .collect();
        (0..index_set.len())
            .map(|i| {
                index_set
                    .digits(i)
                    .iter()
                    .zip(&per_dim)
                    .fold(Complex64::new(1.0, 0.0), |acc, (&d, t)| acc * t[d])
            })
            .collect()
    }

    pub fn eval_complex(&self, x: &[f64]) -> Result<Complex64> {
        check_point(x, self.index_set.dim())?;
        Ok(Self::basis_at(&self.index_set, x)
            .iter()
            .zip(&self.values)
            .map(|(e, t)| e * t)
            .sum())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval_complex(x)?.re)
    }

    /// CSV with header `k_1,..,k_K,re,im`, one row per index in enumeration order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.index_set.dim()).map(|j| format!("k_{j}")).collect();
        header.push("re".into());
        header.push("im".into());
        w.write_record(&header)?;
        for (k, v) in self.index_set.iter().zip(&self.values) {
            let mut rec: Vec<String> = k.iter().map(|kj| kj.to_string()).collect();
            rec.push(v.re.to_string());
            rec.push(v.im.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Reads the CSV layout written by [`CanonicalCoeffs::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let dim = r.headers()?.len().saturating_sub(2);
        if dim == 0 {
            return Err(Error::Config("coefficient CSV needs k columns".into()));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let k = (0..dim)
                .map(|j| {
                    rec[j]
                        .parse::<i64>()
                        .map_err(|e| Error::Config(format!("bad index {:?}: {e}", &rec[j])))
                })
                .collect::<Result<Vec<i64>>>()?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad number {s:?}: {e}")))
            };
            rows.push((k, Complex64::new(parse(&rec[dim])?, parse(&rec[dim + 1])?)));
        }
        let limits = (0..dim)
            .map(|j| rows.iter().map(|(k, _)| k[j].unsigned_abs() as usize).max().unwrap_or(0))
            .collect();
        let index_set = FrequencyIndexSet::new(limits)?;
        if rows.len() != index_set.len() {
            return Err(Error::Config(format!(
                "coefficient CSV has {} rows, index box needs {}",
                rows.len(),
                index_set.len()
            )));
        }
        let mut values = vec![Complex64::new(0.0, 0.0); index_set.len()];
        for (i, (k, v)) in rows.into_iter().enumerate() {
            if index_set.index_of(&k) != Some(i) {
                return Err(Error::Config(format!("row {i} out of enumeration order")));
            }
            values[i] = v;
        }
        Self::new(index_set, values)
    }
}

/// Evaluates `Re sum_k theta_k exp(2 pi i k.x)` and reports the imaginary part.
pub fn partial_sum_eval(coeffs: &CanonicalCoeffs, x: &[f64]) -> Result<PartialSum> {
    let z = coeffs.eval_complex(x)?;
    Ok(PartialSum {
        value: z.re,
        imag_residue: z.im.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dc_only_is_constant() {
        let idx = FrequencyIndexSet::new(vec![2]).unwrap();
        let mut v = vec![Complex64::new(0.0, 0.0); 5];
        v[idx.zero_index()] = Complex64::new(2.5, 0.0);
        let c = CanonicalCoeffs::new(idx, v).unwrap();
        for x in [0.0, 0.31, 0.999] {
            let p = partial_sum_eval(&c, &[x]).unwrap();
            assert!((p.value - 2.5).abs() < 1e-15);
        }
    }

    #[test]
    fn plus_minus_one_half_gives_cosine() {
        let idx = FrequencyIndexSet::new(vec![1]).unwrap();
        let c = CanonicalCoeffs::new(
            idx,
            vec![Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.0)],
        )
        .unwrap();
        let p = partial_sum_eval(&c, &[0.0]).unwrap();
        assert!((p.value - 1.0).abs() < 1e-15);
        assert!(p.imag_residue < 1e-15);
        assert!(matches!(partial_sum_eval(&c, &[0.1, 0.2]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn symmetrize_makes_hermitian() {
        let idx = FrequencyIndexSet::new(vec![1, 1]).unwrap();
        let v = (0..9).map(|i| Complex64::new(i as f64, (i * i) as f64)).collect();
        let mut c = CanonicalCoeffs::new(idx, v).unwrap();
        assert!(c.hermitian_defect() > 1.0);
        c.symmetrize();
        assert!(c.hermitian_defect() < 1e-15);
        assert_eq!(c.values()[c.index_set().zero_index()].im, 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let idx = FrequencyIndexSet::new(vec![1, 2]).unwrap();
        let v = (0..15).map(|i| Complex64::new(0.1 * i as f64, -0.3 / (1.0 + i as f64))).collect();
        let c = CanonicalCoeffs::new(idx, v).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        c.save_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("k_1,k_2,re,im\n-1,-2,0,-0.3\n"));
        assert_eq!(CanonicalCoeffs::read_csv(&p).unwrap(), c);
    }
}
