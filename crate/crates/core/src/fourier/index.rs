use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The box `{k : |k_j| <= N_j}` of integer frequency tuples, enumerated
/// lexicographically with `k_1` most significant and each coordinate
/// running from `-N_j` up to `N_j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrequencyIndexSet {
    limits: Vec<usize>,
}

impl FrequencyIndexSet {
    pub fn new(limits: Vec<usize>) -> Result<Self> {
        if limits.is_empty() {
            return Err(Error::Config("index set needs at least one dimension".into()));
        }
        Ok(Self { limits })
    }

    /// Smallest symmetric box with equal limits in every dimension whose
    /// cardinality is at least `samples`.
    pub fn smallest_covering(dim: usize, samples: usize) -> Result<Self> {
        let mut n = 0usize;
        while (2 * n + 1).pow(dim as u32) < samples {
            n += 1;
        }
        Self::new(vec![n; dim])
    }

    pub fn limits(&self) -> &[usize] {
        &self.limits
    }

    pub fn dim(&self) -> usize {
        self.limits.len()
    }

    pub fn len(&self) -> usize {
        self.limits.iter().map(|&n| 2 * n + 1).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Position of `k = 0` in the enumeration.
    pub fn zero_index(&self) -> usize {
        (self.len() - 1) / 2
    }

    /// Per-coordinate offsets `k_j + N_j` of the tuple at position `i`.
    pub fn digits(&self, mut i: usize) -> Vec<usize> {
        let mut d = vec![0; self.limits.len()];
        for j in (0..self.limits.len()).rev() {
            let radix = 2 * self.limits[j] + 1;
            d[j] = i % radix;
            i /= radix;
        }
        d
    }

    pub fn tuple(&self, i: usize) -> Vec<i64> {
        self.digits(i)
            .into_iter()
            .zip(&self.limits)
            .map(|(d, &n)| d as i64 - n as i64)
            .collect()
    }

    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        if k.len() != self.limits.len() {
            return None;
        }
        let mut i = 0usize;
        for (&kj, &n) in k.iter().zip(&self.limits) {
            if kj.unsigned_abs() as usize > n {
                return None;
            }
            i = i * (2 * n + 1) + (kj + n as i64) as usize;
        }
        Some(i)
    }

    /// Position of `-k` given the position of `k`. Negation reverses every
    /// digit, which reverses the whole enumeration.
    pub fn negated(&self, i: usize) -> usize {
        self.len() - 1 - i
    }

    pub fn iter(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.len()).map(move |i| self.tuple(i))
    }

    /// `max_j |k_j|` for the tuple at position `i`.
    pub fn shell(&self, i: usize) -> usize {
        self.tuple(i)
            .into_iter()
            .map(|k| k.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }
}

/// The uniform tensor grid `x_j in {0, 1/G_j, .., (G_j-1)/G_j}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuadratureGrid {
    points_per_dim: Vec<usize>,
}

impl QuadratureGrid {
    pub fn new(points_per_dim: Vec<usize>) -> Result<Self> {
        if points_per_dim.is_empty() || points_per_dim.iter().any(|&g| g == 0) {
            return Err(Error::Config(
                "grid needs a positive point count in every dimension".into(),
            ));
        }
        Ok(Self { points_per_dim })
    }

    /// `G_j = 4 N_j + 4`, twice the Nyquist minimum.
    pub fn default_for(idx: &FrequencyIndexSet) -> Self {
        Self {
            points_per_dim: idx.limits().iter().map(|&n| 4 * n + 4).collect(),
        }
    }

    pub fn points_per_dim(&self) -> &[usize] {
        &self.points_per_dim
    }

    pub fn dim(&self) -> usize {
        self.points_per_dim.len()
    }

    pub fn len(&self) -> usize {
        self.points_per_dim.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Per-dimension node counters of node `i` (lexicographic, first dim slowest).
    pub fn counters(&self, mut i: usize) -> Vec<usize> {
        let mut c = vec![0; self.points_per_dim.len()];
        for j in (0..self.points_per_dim.len()).rev() {
            c[j] = i % self.points_per_dim[j];
            i /= self.points_per_dim[j];
        }
        c
    }

    pub fn node(&self, i: usize) -> Vec<f64> {
        self.counters(i)
            .into_iter()
            .zip(&self.points_per_dim)
            .map(|(n, &g)| n as f64 / g as f64)
            .collect()
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Requires `G_j >= 2 N_j + 2` in every dimension.
    pub fn check_nyquist(&self, idx: &FrequencyIndexSet) -> Result<()> {
        if idx.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: idx.dim(),
                got: self.dim(),
            });
        }
        for (dim, (&g, &n)) in self.points_per_dim.iter().zip(idx.limits()).enumerate() {
            let required = 2 * n + 2;
            if g < required {
                return Err(Error::Nyquist {
                    dim,
                    points: g,
                    required,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn enumeration_is_lexicographic() {
        let idx = FrequencyIndexSet::new(vec![1, 2]).unwrap();
        assert_eq!(idx.len(), 15);
        assert_eq!(idx.tuple(0), vec![-1, -2]);
        assert_eq!(idx.tuple(1), vec![-1, -1]);
        assert_eq!(idx.tuple(5), vec![0, -2]);
        assert_eq!(idx.tuple(14), vec![1, 2]);
        assert_eq!(idx.tuple(idx.zero_index()), vec![0, 0]);
    }

    #[test]
    fn smallest_covering_box() {
        assert_eq!(FrequencyIndexSet::smallest_covering(1, 4).unwrap().limits(), &[2]);
        assert_eq!(FrequencyIndexSet::smallest_covering(1, 5).unwrap().limits(), &[2]);
        assert_eq!(FrequencyIndexSet::smallest_covering(1, 6).unwrap().limits(), &[3]);
        assert_eq!(FrequencyIndexSet::smallest_covering(2, 10).unwrap().limits(), &[2, 2]);
        assert_eq!(FrequencyIndexSet::smallest_covering(2, 1).unwrap().limits(), &[0, 0]);
    }

    #[test]
    fn nyquist_check() {
        let idx = FrequencyIndexSet::new(vec![3]).unwrap();
        assert!(QuadratureGrid::new(vec![8]).unwrap().check_nyquist(&idx).is_ok());
        assert!(matches!(
            QuadratureGrid::new(vec![7]).unwrap().check_nyquist(&idx),
            Err(Error::Nyquist { dim: 0, points: 7, required: 8 })
        ));
        assert_eq!(QuadratureGrid::default_for(&idx).points_per_dim(), &[16]);
    }

    #[test]
    fn grid_nodes() {
        let g = QuadratureGrid::new(vec![2, 4]).unwrap();
        assert_eq!(g.len(), 8);
        assert_eq!(g.node(0), vec![0.0, 0.0]);
        assert_eq!(g.node(5), vec![0.5, 0.25]);
    }

    proptest! {
        #[test]
        fn enumeration_bijective_and_closed_under_negation(
            limits in prop::collection::vec(0usize..4, 1..4)
        ) {
            let idx = FrequencyIndexSet::new(limits).unwrap();
            let expected: usize = idx.limits().iter().map(|n| 2 * n + 1).product();
            prop_assert_eq!(idx.len(), expected);
            for i in 0..idx.len() {
                let k = idx.tuple(i);
                prop_assert_eq!(idx.index_of(&k), Some(i));
                let neg: Vec<i64> = k.iter().map(|v| -v).collect();
                prop_assert_eq!(idx.index_of(&neg), Some(idx.negated(i)));
            }
        }
    }
}
