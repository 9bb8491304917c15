use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mode {0}: expected 1, 2 or 3")]
    InvalidMode(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("input has zero energy")]
    ZeroEnergy,

    #[error("degenerate input: spectral rank {found} is below the requested {needed}")]
    RankDeficient { needed: usize, found: usize },

    #[error("zero-norm spectrum at pixel ({0}, {1})")]
    ZeroSpectrum(usize, usize),

    #[error("solver diverged at outer iteration {iter}: non-finite {block}")]
    Diverged { iter: usize, block: &'static str },

    #[error("malformed tensor file: {0}")]
    Malformed(String),

    #[error("unsupported tensor file version {0}")]
    UnsupportedVersion(u32),

    #[error("size mismatch: expected {expected} payload bytes, found {found}")]
    SizeMismatch { expected: u64, found: u64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
