use std::path::PathBuf;

use crate::transform::RigidTransform;

/// Crate-wide error type. Variants map one-to-one onto the failure modes of
/// the public operations; see each function's documentation for which
/// variants it can produce.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("no prediction covers step {0}")]
    NotCovered(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("point behind camera: {0}")]
    BehindCamera(String),

    /// The iterative solver ran out of iterations. Carries the best iterate
    /// found so far together with its root-mean-square residual.
    #[error("no convergence after {iters} iterations (best rmse {rmse:.3e})")]
    NoConvergence {
        iters: usize,
        rmse: f64,
        best: Box<RigidTransform>,
    },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("insufficient history: t={t} but history length requires t >= {min_t}")]
    InsufficientHistory { t: usize, min_t: usize },

    #[error("human timestep not usable through mapping: demo {demo} t={t}")]
    UnmappedTimestep { demo: String, t: usize },

    #[error("degenerate speed profile: {0}")]
    DegenerateProfile(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
