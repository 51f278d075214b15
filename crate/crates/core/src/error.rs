use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),

    #[error("rank mismatch: {0}")]
    RankMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("factor update produced non-finite entries at iteration {iteration}")]
    NonFiniteUpdate { iteration: usize },

    #[error("matrix is not positive definite (failed pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("power iteration did not reach tolerance; best estimate {estimate}")]
    NoConvergence { estimate: f64 },

    #[error("unsupported dtype {0}")]
    UnsupportedDtype(String),

    #[error("unsupported array layout: {0}")]
    UnsupportedLayout(String),

    #[error("expected a 2-D array, found shape {0:?}")]
    NotTwoDimensional(Vec<usize>),

    #[error("corrupt header: {0}")]
    CorruptHeader(String),

    #[error("container format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("container shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
