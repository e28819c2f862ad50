use thiserror::Error;

/// Errors raised by estimators, portfolio construction and the backtest engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("insufficient history: need more than {required} rows, got {actual}")]
    InsufficientHistory { required: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("singular matrix in {context} (condition number {condition:e})")]
    Singular { context: String, condition: f64 },

    #[error("degenerate panel: {0}")]
    DegeneratePanel(String),

    #[error("zero-variance column at index {index}")]
    DegenerateColumn { index: usize },

    #[error("input columns are not demeaned (max |mean| {0:e})")]
    NotDemeaned(f64),

    #[error("c=1 excluded: p = T = {0}")]
    UnitAspectRatio(usize),

    #[error("degenerate normalizer: 1'Θ1 = {0:e}")]
    DegenerateNormalizer(f64),

    #[error("collinear μ̂ and 1 directions (AD - F² = {0:e})")]
    Collinear(f64),

    #[error("non-positive quadratic form μ̂'Θμ̂ = {0:e}")]
    NonPositiveQuadraticForm(f64),

    #[error("non-positive residual scale τ² = {value:e} for row {row}")]
    NonPositiveTau { row: usize, value: f64 },

    #[error("wipeout: portfolio return of -100%")]
    Wipeout,

    #[error("data error: {0}")]
    Data(String),

    #[error("missing value at ({row},{col})")]
    MissingValue { row: usize, col: usize },

    #[error("dates not strictly increasing at row {row}: {prev} then {next}")]
    NonMonotoneDates {
        row: usize,
        prev: String,
        next: String,
    },

    #[error("duplicate date {date} at row {row}")]
    DuplicateDate { row: usize, date: String },

    #[error("date alignment error: {0}")]
    Alignment(String),

    #[error("invalid synthetic market spec: {0}")]
    Spec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
