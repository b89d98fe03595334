use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },

    #[error("non-finite value produced in {context}")]
    NonFinite { context: String },

    #[error("invalid layer stack: {0}")]
    BadLayerSpec(String),

    #[error("backward called without a cached forward pass")]
    NoForwardCache,

    #[error("layer count {value} outside [1, {max}]")]
    LayerOutOfBounds { value: i64, max: u32 },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("csv parse error at row {row}, column {col}: {msg}")]
    CsvCell { row: usize, col: usize, msg: String },

    #[error("target column {0:?} not found")]
    MissingTargetColumn(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("corrupt weight file: {0}")]
    CorruptWeights(String),

    #[error("missing logs: {0}")]
    MissingLogs(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
