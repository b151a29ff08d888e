use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix shape {rows}x{cols} does not match {len} entries")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },

    #[error("expected a square matrix, got {0}x{1}")]
    NotSquare(usize, usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown factor `{0}`")]
    UnknownFactor(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("operator `{name}` is not unitary (max deviation {deviation:e})")]
    NotUnitary { name: String, deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("invalid measurement basis: {0}")]
    InvalidBasis(String),

    #[error("{quantity} is negative beyond tolerance: {value:e}")]
    NegativeQuantity { quantity: &'static str, value: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// A scenario file failed to parse or validate. `field` is a dotted path
    /// into the document, `line`/`column` are set when the JSON parser knows them.
    #[error("{}", format_file_error(.field, .line, .column, .message))]
    ScenarioFile {
        field: String,
        line: Option<usize>,
        column: Option<usize>,
        message: String,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

fn format_file_error(field: &str, line: &Option<usize>, column: &Option<usize>, message: &str) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!("field `{field}` (line {l}, column {c}): {message}"),
        _ => format!("field `{field}`: {message}"),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
