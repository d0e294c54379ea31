//! Fourier canonical-space diagnostics for small dense networks.
//!
//! A network `f_w` on `[0,1]^K` is mapped to its truncated Fourier
//! coefficients. Training in that space is convex; the disparity matrix
//! relates literal weight gradients to canonical gradients and its rank
//! decides whether a literal stationary point is a global minimum.

pub mod canonical;
pub mod disparity;
pub mod error;
pub mod experiments;
pub mod fourier;
pub mod linalg;
pub mod nn;
pub mod plot;
pub mod seed;
pub mod trainer;

pub use error::{Error, Result};
