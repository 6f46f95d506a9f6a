use thiserror::Error;

use crate::ClassId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error(
        "matrix is singular or not positive definite \
         (smallest eigenvalue {min_eigenvalue:.3e}, largest {max_eigenvalue:.3e})"
    )]
    SingularMatrix { min_eigenvalue: f64, max_eigenvalue: f64 },

    #[error("requested rank {requested} exceeds the available {available}")]
    RankRequestTooLarge { requested: usize, available: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("sample {index} has zero norm")]
    ZeroNormSample { index: usize },

    #[error("class {class} has {size} members, at least {required} required")]
    ClassTooSmall {
        class: ClassId,
        size: usize,
        required: usize,
    },

    #[error("neighbor count must be at least 1")]
    InvalidNeighborCount,

    #[error("unsupported spectral filter: {0}")]
    UnsupportedFilter(String),

    #[error("graph has {graph} nodes but the views have {samples} samples")]
    GraphSizeMismatch { graph: usize, samples: usize },

    #[error("Tikhonov parameter must be positive, got {0}")]
    EpsilonNonPositive(f64),

    #[error("{which} kernel has numerical rank {rank}, cannot extract {requested} directions")]
    SingularKernel {
        which: &'static str,
        rank: usize,
        requested: usize,
    },

    #[error("kernel bandwidth must be positive, got {0}")]
    BandwidthNonPositive(f64),

    #[error("degenerate data: median pairwise distance is zero")]
    DegenerateData,

    #[error("kernel dictionary is empty or has no positive weight")]
    EmptyDictionary,

    #[error("kernel weight {index} is negative ({weight})")]
    NegativeWeight { index: usize, weight: f64 },

    #[error("split point {dx} is invalid for {rows} features")]
    BadSplitPoint { dx: usize, rows: usize },

    #[error("k = {k} neighbors requested but only {available} training samples")]
    KTooLarge { k: usize, available: usize },

    #[error("invalid split plan: {0}")]
    InvalidPlan(String),

    #[error("invalid hyperparameter grid: {0}")]
    InvalidGrid(String),

    #[error("{variant} cell (gamma={gamma:e}, epsilon={epsilon:e}) failed: {source}")]
    GridCell {
        variant: String,
        gamma: f64,
        epsilon: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("ragged rows: line {line} has {found} fields, expected {expected}")]
    RaggedRows { line: usize, expected: usize, found: usize },

    #[error("bad IDX magic number: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },

    #[error("truncated file: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },

    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("malformed file at line {line}: {message}")]
    Format { line: usize, message: String },
}

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
