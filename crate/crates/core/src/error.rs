use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("trajectory too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },

    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("missing file: {}", path.display())]
    MissingFile { path: PathBuf },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("surgeon {surgeon_id} trial {trial_index}: {source}")]
    Trial {
        surgeon_id: String,
        trial_index: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("{hand} hand: {source}")]
    Hand {
        hand: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid data: {0}")]
    Invalid(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("logistic regression did not converge in {iterations} iterations (gradient norm {grad_norm:e})")]
    LrNotConverged { iterations: usize, grad_norm: f64 },

    #[error("training data is perfectly separable and l2 = 0, so the coefficients diverge; use l2 > 0")]
    Separation,

    #[error("SVM solver did not converge in {passes} passes (KKT violation {violation:e})")]
    SvmNotConverged { passes: usize, violation: f64 },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_trial(self, surgeon_id: &str, trial_index: u32) -> Error {
        Error::Trial {
            surgeon_id: surgeon_id.to_string(),
            trial_index,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_hand(self, hand: &'static str) -> Error {
        Error::Hand {
            hand,
            source: Box::new(self),
        }
    }
}
