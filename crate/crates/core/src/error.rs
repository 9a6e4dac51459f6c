use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("k = {k} exceeds the number of distinct points ({distinct})")]
    KTooLarge { k: usize, distinct: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("bitcode length mismatch: {left} vs {right} bits")]
    LengthMismatch { left: usize, right: usize },
    #[error("image too small: {width}x{height} (minimum 16x16)")]
    ImageTooSmall { width: u32, height: u32 },
    #[error("covariance of positive pairs is not positive definite after regularization")]
    SingularCovariance,
    #[error("weak learner failed in round {round}: weighted error {error:.4} >= 0.5")]
    WeakLearnerFailure { round: usize, error: f64 },
    #[error("scoring mode does not match operands: {0}")]
    ModeMismatch(&'static str),
    #[error("sequence has no bitcodes")]
    MissingBitcodes,
    #[error("band layout mismatch: {0}")]
    BandMismatch(String),
    #[error("empty query")]
    EmptyQuery,
    #[error("empty index")]
    EmptyIndex,
    #[error("invalid distance matrix: {0}")]
    InvalidMatrix(String),
    #[error("tree leaves do not match sequence labels: {0}")]
    LabelMismatch(String),
    #[error("mutation kind {0} is not applicable here")]
    KindMismatch(&'static str),
    #[error("empty sequence")]
    EmptySequence,
    #[error("need at least two distinct sources, found {0}")]
    InsufficientSources(usize),
    #[error("corpus too small: {0}")]
    CorpusTooSmall(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn format(offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
