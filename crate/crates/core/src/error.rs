use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {0:?} lies outside the unit hypercube")]
    OutOfDomain(Vec<f64>),

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("weight vector has length {got}, architecture requires {expected}")]
    WeightCount { expected: usize, got: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("training set is empty")]
    EmptyData,

    #[error("training inputs {first} and {second} are not pairwise distinct")]
    DuplicateInputs { first: usize, second: usize },

    #[error("grid violates the Nyquist constraint in dimension {dim}: {points} points < required {required}")]
    Nyquist {
        dim: usize,
        points: usize,
        required: usize,
    },

    #[error("evaluation grid too coarse in dimension {dim}: {points} points < required {required}")]
    GridTooCoarse {
        dim: usize,
        points: usize,
        required: usize,
    },

    #[error("index sets differ")]
    IndexSetMismatch,

    #[error("index set has {n} coefficients but {t} samples were given")]
    Underdetermined { n: usize, t: usize },

    #[error("square interpolation system is numerically singular (condition number {condition:.3e})")]
    SingularSystem { condition: f64 },

    #[error("SVD failed to converge for a {rows}x{cols} matrix")]
    SvdNonConvergence { rows: usize, cols: usize },

    #[error("learning rate {lr} outside (0, {limit:.6e})")]
    LearningRate { lr: f64, limit: f64 },

    #[error("loss increased during convex descent at step {step}: {before:.6e} -> {after:.6e}")]
    DescentViolation { step: usize, before: f64, after: f64 },

    #[error("invalid neuron {0}")]
    InvalidNeuron(String),

    #[error("kill_neurons requires relu activation")]
    KillNeedsRelu,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at step {step}")]
    Diverged { step: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by malformed input files or settings, as opposed to
    /// numerical failures during a run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidArchitecture(_)
                | Error::WeightCount { .. }
                | Error::Nyquist { .. }
                | Error::GridTooCoarse { .. }
                | Error::Underdetermined { .. }
                | Error::DuplicateInputs { .. }
                | Error::EmptyData
                | Error::InvalidNeuron(_)
                | Error::KillNeedsRelu
                | Error::LearningRate { .. }
                | Error::DimensionMismatch { .. }
                | Error::OutOfDomain(_)
                | Error::IndexSetMismatch
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
