use thiserror::Error;

/// Errors raised anywhere in the estimation and sensitivity pipeline.
///
/// Variants are split into two families: input/validation problems
/// (bad tables, bad parameters) and numerical failures (rank deficiency,
/// separation, degenerate weights). [`Error::is_numerical`] tells them apart.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("{table} table has no column `{column}`")]
    MissingColumn { table: &'static str, column: String },

    #[error("treatment value `{value}` at row {row} is not 0 or 1")]
    NonBinaryTreatment { row: usize, value: String },

    #[error("treatment arm {arm} has {rows} rows, need at least {required}")]
    EmptyArm { arm: u8, rows: usize, required: usize },

    #[error("non-finite value in column `{column}` at row {row}")]
    NonFiniteValue { column: String, row: usize },

    #[error("value `{value}` in column `{column}` at row {row} is not numeric")]
    NonNumericValue {
        column: String,
        row: usize,
        value: String,
    },

    #[error("covariate schemas differ: trial {trial:?} vs target {target:?}")]
    SchemaMismatch { trial: Vec<String>, target: Vec<String> },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("need more rows than columns ({rows} rows, {cols} columns)")]
    TooFewRows { rows: usize, cols: usize },

    #[error("design matrix is rank deficient at column {column}")]
    RankDeficient { column: usize },

    #[error("logistic fit separated after {iterations} iterations (coefficient norm {coefficient_norm:.3})")]
    Separation {
        iterations: usize,
        coefficient_norm: f64,
        /// Last iterate before the norm bound was crossed.
        coefficients: Vec<f64>,
    },

    #[error("labels contain a single class")]
    SingleClass,

    #[error("invalid R² value for {name}: {value}")]
    InvalidR2 { name: &'static str, value: f64 },

    #[error("weights for treatment arm {arm} sum to zero")]
    DegenerateWeights { arm: u8 },

    #[error("at least two covariates are required for benchmarking")]
    SingleCovariate,

    #[error("{failed} of {total} bootstrap resamples failed")]
    BootstrapFailure { failed: usize, total: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Short stable name of the variant, used in CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingColumn { .. } => "MissingColumn",
            Error::NonBinaryTreatment { .. } => "NonBinaryTreatment",
            Error::EmptyArm { .. } => "EmptyArm",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::NonNumericValue { .. } => "NonNumericValue",
            Error::SchemaMismatch { .. } => "SchemaMismatch",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::TooFewRows { .. } => "TooFewRows",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::Separation { .. } => "Separation",
            Error::SingleClass => "SingleClass",
            Error::InvalidR2 { .. } => "InvalidR2",
            Error::DegenerateWeights { .. } => "DegenerateWeights",
            Error::SingleCovariate => "SingleCovariate",
            Error::BootstrapFailure { .. } => "BootstrapFailure",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::TooFewRows { .. }
                | Error::RankDeficient { .. }
                | Error::Separation { .. }
                | Error::SingleClass
                | Error::DegenerateWeights { .. }
                | Error::BootstrapFailure { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
