use thiserror::Error;

/// Crate-wide error type. Variants mirror the failure modes of the geometry,
/// loss and I/O layers so callers can match on the condition they care about.
#[derive(Debug, Error)]
pub enum Error {
    /// Projection requires a point strictly in front of the camera.
    #[error("non-positive depth: z = {z}")]
    NonPositiveDepth { z: f64 },
    /// Point or pixel falls outside the declared valid domain of the model.
    #[error("outside valid domain: {what}")]
    OutOfValidDomain { what: String },
    /// A direction or translation with zero norm where one is required.
    #[error("zero-norm vector: {what}")]
    ZeroVector { what: String },
    /// Iterative inversion failed to reach the requested tolerance.
    #[error("no convergence after {iters} iterations (residual {residual:e})")]
    NoConvergence { iters: usize, residual: f64 },
    /// The radial mapping is not strictly increasing over the valid domain.
    #[error("radial mapping not strictly increasing near theta = {theta}")]
    NonMonotoneRadial { theta: f64 },
    /// Camera parameter rejected at construction.
    #[error("invalid parameter: {what}")]
    InvalidParameter { what: String },
    /// Grid shapes do not agree.
    #[error("dimension mismatch: {what}")]
    DimensionMismatch { what: String },
    /// An operation received no data.
    #[error("empty input: {what}")]
    EmptyInput { what: String },
    /// A reduction found no valid pixels to aggregate.
    #[error("no valid pixels: {what}")]
    NoValidPixels { what: String },
    /// Pose translation too small to carry scale.
    #[error("degenerate translation: norm = {norm:e}")]
    DegenerateTranslation { norm: f64 },
    /// Odometry timestamps must increase strictly.
    #[error("non-monotonic timestamps at sample {index}")]
    NonMonotonicTime { index: usize },
    /// Depth values outside the representable range of the parameterization.
    #[error("degenerate depth: {what}")]
    DegenerateDepth { what: String },
    /// Optimization produced a non-finite objective.
    #[error("optimization diverged at iteration {iter}")]
    Diverged { iter: usize },
    /// Malformed text or binary input.
    #[error("parse error: {what}")]
    Parse { what: String },
    /// Calibration names a model this crate does not implement.
    #[error("unknown camera model: {name}")]
    UnknownModel { name: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parse(what: impl Into<String>) -> Self {
        Error::Parse { what: what.into() }
    }

    pub fn invalid(what: impl Into<String>) -> Self {
        Error::InvalidParameter { what: what.into() }
    }

    pub fn domain(what: impl Into<String>) -> Self {
        Error::OutOfValidDomain { what: what.into() }
    }

    pub fn mismatch(what: impl Into<String>) -> Self {
        Error::DimensionMismatch { what: what.into() }
    }
}
