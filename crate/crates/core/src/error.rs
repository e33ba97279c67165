use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("score matrix must have at least one row and one column")]
    EmptyMatrix,
    #[error("row {row} has {found} scores, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("score {value} at row {row}, column {column} is outside [0, 1]")]
    ScoreOutOfRange { row: usize, column: usize, value: f64 },
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("{expected} {kind} ids given for {found} entries")]
    IdCountMismatch {
        kind: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("algorithm index {index} out of range for {count} algorithms")]
    AlgorithmOutOfRange { index: usize, count: usize },
    #[error("unknown algorithm id `{0}`")]
    UnknownAlgorithm(String),
    #[error("allowed algorithm subset is empty")]
    EmptySubset,
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("cannot compute over an empty list")]
    EmptyInput,
    #[error("wrong count {wrong} out of range for {rows} instances")]
    WrongCountOutOfRange { wrong: usize, rows: usize },
    #[error("exhaustive enumeration limited to {limit} instances, matrix has {rows}; use Monte Carlo trials instead")]
    EnumerationGuard { rows: usize, limit: usize },
    #[error("matrix is not binarized: row {row} is not one-hot")]
    NotBinary { row: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid pixel counts: {0}")]
    InvalidPixelCounts(String),
    #[error("label maps differ in size: {left_width}x{left_height} vs {right_width}x{right_height}")]
    DimensionMismatch {
        left_width: usize,
        left_height: usize,
        right_width: usize,
        right_height: usize,
    },
    #[error("label {0} does not occur in the ground truth")]
    LabelAbsent(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
