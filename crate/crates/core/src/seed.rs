//! Counter-based seed splitting.
//!
//! Every random component draws from a ChaCha8 stream keyed by the single
//! 64-bit run seed, with the component index appended as the 64-bit stream
//! number. Components never share a stream, so adding draws to one cannot
//! shift the numbers another sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Input locations of a synthetic dataset.
pub const DATA_INPUTS: u64 = 0;
/// Labels or planted coefficients of a synthetic dataset.
pub const DATA_LABELS: u64 = 1;
/// Weight initialisation.
pub const INIT: u64 = 2;
/// Minibatch shuffling.
pub const SHUFFLE: u64 = 3;

pub fn component_rng(seed: u64, component: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(component);
    rng
}
