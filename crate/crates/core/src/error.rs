use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the batchlens library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    UnsupportedChannels(usize),

    #[error("invalid dimensions {height}x{width}: {reason}")]
    InvalidDimensions {
        height: usize,
        width: usize,
        reason: &'static str,
    },

    #[error("pixel value {value} at index {index} is outside [0, 1]")]
    ValueOutOfRange { index: usize, value: f64 },

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize, usize),
        right: (usize, usize, usize),
    },

    #[error("mask has no missing pixels")]
    EmptyMissingRegion,

    #[error("no co-occurring pixel pairs inside the missing region")]
    NoGlcmPairs,

    #[error("could not reach missing ratio {target} (got {achieved}) after {attempts} attempts")]
    UnreachableMaskRatio {
        target: f64,
        achieved: f64,
        attempts: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("weights must be nonnegative and sum to 1, got ({0}, {1}, {2})")]
    InvalidWeights(f64, f64, f64),

    #[error("requested {requested} samples from a population of {available}")]
    PopulationTooSmall { requested: usize, available: usize },

    #[error("non-finite selection score {score} for sample {id}")]
    NonFiniteScore { id: usize, score: f64 },

    #[error("loss callback failed: {0}")]
    LossCallback(String),

    #[error("training diverged at iteration {iteration}: loss {loss} exceeds 10x initial {initial}")]
    Diverged {
        iteration: usize,
        loss: f64,
        initial: f64,
    },

    #[error("failed to decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("unsupported bit depth in {path}: {depth}")]
    UnsupportedBitDepth { path: PathBuf, depth: String },

    #[error("malformed {what}: {reason}")]
    Malformed { what: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
