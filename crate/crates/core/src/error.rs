use thiserror::Error;

/// Errors raised by the solvers and their plumbing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-positive radius: {0}")]
    NonPositiveRadius(f64),
    #[error("grid too small: n = {0}, need at least 16 interior nodes")]
    GridTooSmall(usize),
    #[error("grid mismatch: (R={0}, n={1}) vs (R={2}, n={3})")]
    GridMismatch(f64, usize, f64, usize),
    #[error("symbol is not finite at momentum k = {0}")]
    NonFiniteSymbol(f64),
    #[error("negative mass: {0}")]
    NegativeMass(f64),
    #[error("interaction energy vanishes")]
    ZeroInteraction,
    #[error("input function is identically zero")]
    ZeroFunction,
    #[error("input is not L2-normalized: norm^2 = {0}")]
    NotNormalized(f64),
    #[error("coupling a = {a} is not below the critical value a* = {a_star}")]
    SupercriticalCoupling { a: f64, a_star: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("not enough valid rows for a fit: have {have}, need {need}")]
    InsufficientRows { have: usize, need: usize },
    #[error("frame scale mismatch: stored {stored}, requested {requested}")]
    FrameMismatch { stored: f64, requested: f64 },
    #[error("kernel |x-y|^-{0} is not integrable against this pair function")]
    NonIntegrableKernel(f64),
    #[error("multipole cutoff {l_c} is below 2*l_max = {need}")]
    MultipoleCutoffTooSmall { l_c: usize, need: usize },
    #[error("symmetric sector too large: dimension {0}")]
    SectorTooLarge(usize),
    #[error("eigensolver did not converge: residual {0:e}")]
    EigenNotConverged(f64),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
