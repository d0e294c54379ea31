use std::path::Path;

use super::check_point;
use crate::error::{Error, Result};

/// Samples `(x_t, y_t)` with pairwise-distinct inputs in `[0,1]^K`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    dim: usize,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl TrainingSet {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                got: targets.len(),
            });
        }
        if inputs.is_empty() {
            return Err(Error::EmptyData);
        }
        let dim = inputs[0].len();
        for x in &inputs {
            check_point(x, dim)?;
        }
        if let Some(i) = targets.iter().position(|y| !y.is_finite()) {
            return Err(Error::NonFinite(format!("target {i}")));
        }
        for i in 0..inputs.len() {
            for j in 0..i {
                if inputs[i] == inputs[j] {
                    return Err(Error::DuplicateInputs { first: j, second: i });
                }
            }
        }
        Ok(Self {
            dim,
            inputs,
            targets,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn sample(&self, t: usize) -> (&[f64], f64) {
        (&self.inputs[t], self.targets[t])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.inputs
            .iter()
            .zip(&self.targets)
            .map(|(x, &y)| (x.as_slice(), y))
    }

    /// Smallest Euclidean distance between two inputs.
    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.inputs.len() {
            for j in 0..i {
                let d: f64 = self.inputs[i]
                    .iter()
                    .zip(&self.inputs[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                best = best.min(d.sqrt());
            }
        }
        best
    }

    /// CSV with header `x_1,..,x_K,y`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (1..=self.dim).map(|j| format!("x_{j}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for (x, y) in self.iter() {
            let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format written by [`TrainingSet::write_csv`]; the last column is the target.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Config(format!("bad number {s:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            let (y, x) = vals
                .split_last()
                .ok_or_else(|| Error::Config("empty CSV row".into()))?;
            inputs.push(x.to_vec());
            targets.push(*y);
        }
        Self::new(inputs, targets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_inputs() {
        let err = TrainingSet::new(vec![vec![0.2], vec![0.2]], vec![1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::DuplicateInputs { first: 0, second: 1 }));
    }

    #[test]
    fn rejects_points_outside_cube() {
        assert!(matches!(
            TrainingSet::new(vec![vec![-0.1]], vec![0.0]),
            Err(Error::OutOfDomain(_))
        ));
        assert!(matches!(TrainingSet::new(vec![], vec![]), Err(Error::EmptyData)));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let d = TrainingSet::new(vec![vec![0.1, 0.2], vec![0.3, 0.4]], vec![-1.0, 0.123456789]).unwrap();
        d.write_csv(&p).unwrap();
        assert_eq!(TrainingSet::read_csv(&p).unwrap(), d);
    }
}
