use thiserror::Error;

/// Errors raised anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid skeleton layout: {0}")]
    InvalidLayout(String),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("frame index {current} does not follow {previous}")]
    NonIncreasingFrames { previous: u64, current: u64 },
    #[error("frame has no valid joints")]
    NoValidJoints,
    #[error("frame index {index} out of range for sequence of length {len}")]
    OutOfRange { index: usize, len: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("empty input")]
    EmptyInput,
    #[error("need at least {needed} distinct samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("class {0:?} has no training samples")]
    DegenerateLabels(String),
    #[error("unknown class {0:?}")]
    UnknownClass(String),
    #[error("empty score list")]
    EmptyScores,
    #[error("calibration needs both positive and negative labels")]
    SingleClassLabels,
    #[error("time {current} does not follow {previous}")]
    NonMonotonicTime { previous: u64, current: u64 },
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("non-finite cost at ({row}, {col})")]
    NonFiniteCost { row: usize, col: usize },
    #[error("no jointly valid joints")]
    NoCommonJoints,
    #[error("timeline length mismatch: {gt} vs {pred}")]
    LengthMismatch { gt: usize, pred: usize },
    #[error("invalid timeline: {0}")]
    InvalidTimeline(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("layout mismatch at line {line}: {message}")]
    LayoutMismatch { line: usize, message: String },
    #[error("malformed header at line {line}: {message}")]
    MalformedHeader { line: usize, message: String },
    #[error("truncated file at line {line}: {message}")]
    TruncatedFile { line: usize, message: String },
    #[error("unsupported archive format version {0}")]
    VersionUnsupported(u32),
    #[error("digest mismatch for {0}")]
    DigestMismatch(String),
    #[error("grid has {points} points, cap is {cap}")]
    GridTooLarge { points: usize, cap: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
