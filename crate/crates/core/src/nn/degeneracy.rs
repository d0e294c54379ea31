//! Dead and duplicated hidden units.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::MlpNetwork;
use crate::error::{Error, Result};

/// Output range at or below which a hidden unit counts as dead.
pub const DEAD_RANGE_TOL: f64 = 1e-10;

/// A hidden unit, addressed by hidden-layer index (0 = first hidden layer).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NeuronId {
    pub layer: usize,
    pub unit: usize,
}

impl NeuronId {
    pub fn new(layer: usize, unit: usize) -> Self {
        Self { layer, unit }
    }

    pub fn check(self, net: &MlpNetwork) -> Result<()> {
        match net.hidden_sizes().get(self.layer) {
            Some(&h) if self.unit < h => Ok(()),
            _ => Err(Error::InvalidNeuron(self.to_string())),
        }
    }
}

impl fmt::Display for NeuronId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.layer, self.unit)
    }
}

/// Uniform tensor grid over `[0,1]^K` including both endpoints, lexicographic.
pub fn probe_grid(dim: usize, points_per_dim: usize) -> Vec<Vec<f64>> {
    let p = points_per_dim.max(2);
    let axis: Vec<f64> = (0..p).map(|i| i as f64 / (p - 1) as f64).collect();
    let mut out = vec![Vec::with_capacity(dim)];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    out
}

/// Hidden units whose post-activation output varies by at most
/// [`DEAD_RANGE_TOL`] over the probe points.
pub fn detect_dead_neurons(net: &MlpNetwork, probe: &[Vec<f64>]) -> Result<Vec<NeuronId>> {
    if probe.is_empty() {
        return Err(Error::Config("probe grid is empty".into()));
    }
    let sizes = net.hidden_sizes();
    let mut lo: Vec<Vec<f64>> = sizes.iter().map(|&h| vec![f64::INFINITY; h]).collect();
    let mut hi: Vec<Vec<f64>> = sizes.iter().map(|&h| vec![f64::NEG_INFINITY; h]).collect();
    for x in probe {
        let tr = net.trace(x)?;
        for (l, post) in tr.post.iter().enumerate() {
            for (u, &a) in post.iter().enumerate() {
                lo[l][u] = lo[l][u].min(a);
                hi[l][u] = hi[l][u].max(a);
            }
        }
    }
    let mut dead = Vec::new();
    for (l, (lo, hi)) in lo.iter().zip(&hi).enumerate() {
        for u in 0..lo.len() {
            if hi[u] - lo[u] <= DEAD_RANGE_TOL {
                dead.push(NeuronId::new(l, u));
            }
        }
    }
    Ok(dead)
}

/// Same-layer pairs with incoming rows (bias included) and outgoing columns
/// both within `tol` in max-norm.
pub fn detect_duplicated_neurons(net: &MlpNetwork, tol: f64) -> Result<Vec<(NeuronId, NeuronId)>> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("duplicate tolerance must be positive, got {tol}")));
    }
    let w = net.weights();
    let mut pairs = Vec::new();
    for (l, &h) in net.hidden_sizes().iter().enumerate() {
        let fan_in = net.layer_fan_in(l);
        let next_out = net.layer_fan_out(l + 1);
        let incoming = |u: usize| {
            (0..fan_in)
                .map(move |c| w[net.weight_index(l, u, c)])
                .chain(std::iter::once(w[net.bias_index(l, u)]))
        };
        let outgoing = |u: usize| (0..next_out).map(move |r| w[net.weight_index(l + 1, r, u)]);
        for a in 0..h {
            for b in a + 1..h {
                let din = incoming(a)
                    .zip(incoming(b))
                    .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
                if din > tol {
                    continue;
                }
                let dout = outgoing(a)
                    .zip(outgoing(b))
                    .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
                if dout <= tol {
                    pairs.push((NeuronId::new(l, a), NeuronId::new(l, b)));
                }
            }
        }
    }
    Ok(pairs)
}
