use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("sample too small to split: n = {0}, need at least 4")]
    SampleTooSmall(usize),

    #[error("dataset failed validation: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("single-class treatment: {0}")]
    SingleClass(String),

    #[error("rank deficient design: column(s) {columns:?} are collinear with earlier columns")]
    RankDeficient { columns: Vec<usize> },

    #[error("all weights are zero")]
    ZeroWeights,

    #[error("overlap violation: {0}")]
    OverlapViolation(String),

    #[error("no heterogeneity in scores")]
    NoHeterogeneity,

    #[error("group(s) {0:?} have fewer than 2 main-sample observations")]
    EmptyGroups(Vec<usize>),

    #[error("no treatment variation in group {0}")]
    NoTreatmentVariation(usize),

    #[error("propensity score {value} at row {row} is not strictly inside (0, 1)")]
    DegeneratePropensity { row: usize, value: f64 },

    #[error("{failed} of {total} splits failed (limit {limit}); first error: {first}")]
    TooManyFailedSplits {
        failed: usize,
        total: usize,
        limit: usize,
        first: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("missing bundle file(s): {}", .0.join(", "))]
    MissingBundleFiles(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by the input data rather than by the computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::DimensionMismatch(_)
                | Error::SampleTooSmall(_)
                | Error::Validation(_)
                | Error::SingleClass(_)
                | Error::OverlapViolation(_)
                | Error::Csv(_)
        )
    }
}
