use thiserror::Error;

/// Errors produced by the fitting, projection and prediction routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("integration failed at t = {t_reached} (step size underflow)")]
    IntegrationFailed { t_reached: f64 },

    #[error("unknown system `{0}` (expected pitchfork, duffing or lorenz)")]
    UnknownSystem(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no injectivity witness for state coordinate {coordinate}")]
    UnsupportedDictionary { coordinate: usize },

    #[error("regression matrix is singular (smallest singular value {smallest_singular_value:e}, largest {largest_singular_value:e})")]
    Singular {
        smallest_singular_value: f64,
        largest_singular_value: f64,
    },

    #[error("covariance surrogate not identifiable: parameter moment matrix has rank {rank}, need {required}")]
    NotIdentifiable { rank: usize, required: usize },

    #[error("grid of {requested} points exceeds the limit of {limit}")]
    GridTooLarge { requested: u128, limit: u128 },

    #[error("model file format version {found} is not supported (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("model file checksum mismatch (stored {stored}, computed {computed})")]
    ChecksumMismatch { stored: String, computed: String },

    #[error("model file schema error: {0}")]
    Schema(String),

    #[error("malformed file: {0}")]
    Malformed(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
