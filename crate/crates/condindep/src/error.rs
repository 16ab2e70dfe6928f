//! Crate-wide error type and the stable exit codes used by the CLI.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // -- data ingestion / validation -------------------------------------
    #[error("missing column `{0}` in CSV header")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: {message}")]
    BadCell {
        row: usize,
        column: String,
        message: String,
    },
    #[error("dataset has {0} observations; need at least 2")]
    TooFewRows(usize),
    #[error("row {row} has {found} covariates, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("container lengths disagree: {0} covariate rows, {1} labels, {2} z values")]
    LengthMismatch(usize, usize, usize),
    #[error("label at position {index} is {value}; labels must be 0 or 1")]
    NonBinaryLabel { index: usize, value: f64 },
    #[error("non-finite value in {what} at position {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("class {0} has no observations; the test needs both classes")]
    MissingClass(u8),

    // -- directions and index estimation ----------------------------------
    #[error("direction has {found} components, dataset has {expected} covariates")]
    DimensionMismatch { found: usize, expected: usize },
    #[error("direction vector must have unit norm; |beta| = {0}")]
    NotUnit(f64),
    #[error("zero direction vector")]
    ZeroVector,
    #[error("covariate x{0} has zero variance; cannot set a bandwidth")]
    ZeroVariance(usize),
    #[error("bandwidth h[{index}] = {value} must be positive")]
    NonPositiveBandwidth { index: usize, value: f64 },
    #[error("direction unidentified: the average-derivative estimate is the zero vector")]
    UnidentifiedDirection,

    // -- partition ---------------------------------------------------------
    #[error("cell count m must be at least 1")]
    ZeroCells,
    #[error("requested m = {m} cells but the sample has only n = {n} observations")]
    TooManyCells { m: usize, n: usize },
    #[error(
        "cannot build {m} equal-mass cells: boundary a_{k} collides with a_{} \
         (too few distinct index values); reduce m", k - 1
    )]
    DistinctValueDeficiency { m: usize, k: usize },
    #[error("index value {value} lies outside the partition range ({lo}, {hi}]")]
    ValueOutOfRange { value: f64, lo: f64, hi: f64 },
    #[error(
        "class {class} has no observations in cell {cell}: m is too large for \
         this sample; reduce m (the CLI offers --auto-shrink-m)"
    )]
    EmptyCell { class: u8, cell: usize },

    // -- empirical process ---------------------------------------------------
    #[error(
        "degenerate partition: the expression under the variance-normalizer \
         root is {0} (<= 1e-12)"
    )]
    NonPositiveNormalizer(f64),

    // -- limiting distribution ------------------------------------------------
    #[error("probability level must lie strictly in (0, 1); got {0}")]
    LevelOutOfRange(f64),
    #[error("test statistic must be nonnegative; got {0}")]
    NegativeStatistic(f64),

    // -- harness / configuration ----------------------------------------------
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error(
        "grid cell [{cell}]: {invalid} of {budget} replications were invalid \
         (empty cells); exceeds the 1% budget, reduce m or increase n"
    )]
    ExcessInvalid {
        cell: String,
        invalid: usize,
        budget: usize,
    },
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable process exit codes: 2 data error, 3 partition/cell degeneracy,
    /// 4 unidentified direction, 5 configuration error.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            MissingColumn(_)
            | BadCell { .. }
            | TooFewRows(_)
            | RaggedRow { .. }
            | LengthMismatch(..)
            | NonBinaryLabel { .. }
            | NonFinite { .. }
            | MissingClass(_)
            | DimensionMismatch { .. }
            | NotUnit(_)
            | ZeroVector
            | ZeroVariance(_)
            | NonPositiveBandwidth { .. }
            | Io(_)
            | Csv(_) => 2,
            ZeroCells
            | TooManyCells { .. }
            | DistinctValueDeficiency { .. }
            | ValueOutOfRange { .. }
            | EmptyCell { .. }
            | NonPositiveNormalizer(_)
            | ExcessInvalid { .. } => 3,
            UnidentifiedDirection => 4,
            LevelOutOfRange(_) | NegativeStatistic(_) | Config { .. } | Checkpoint { .. } => 5,
        }
    }
}
