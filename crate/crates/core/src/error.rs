use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the preprocessing, fusion, modelling and
/// reporting stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed json in {path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error("malformed csv in {path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("axis not strictly increasing")]
    AxisNotMonotonic,
    #[error("invalid axis: {0}")]
    InvalidAxis(String),
    #[error("axis mismatch: {0}")]
    AxisMismatch(String),
    #[error("duplicate record for patient {patient_id} replicate {replicate}")]
    DuplicateRecord { patient_id: String, replicate: u32 },
    #[error("target grid [{lo}, {hi}] extends beyond source range [{src_lo}, {src_hi}]")]
    OutOfRange {
        lo: f64,
        hi: f64,
        src_lo: f64,
        src_hi: f64,
    },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("zero variance: {0}")]
    ZeroVariance(String),
    #[error("zero denominator in {0} normalization")]
    ZeroDenominator(&'static str),
    #[error("non-uniform axis step (relative deviation {0:.3e})")]
    NonUniformAxis(f64),
    #[error("ill-conditioned polynomial fit: {0}")]
    IllConditioned(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("single class present: {0}")]
    SingleClass(String),
    #[error("fewer groups ({groups}) than folds ({folds})")]
    TooFewGroups { groups: usize, folds: usize },
    #[error("group {0} carries more than one label")]
    MixedGroupLabel(String),
    #[error("degenerate fold: {0}")]
    DegenerateFold(String),
    #[error("no patients shared by modalities {0}")]
    EmptyIntersection(String),
    #[error("missing report files: {0}")]
    MissingReport(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        Error::Json {
            path: path.into(),
            message: err.to_string(),
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        Error::Csv {
            path: path.into(),
            message: err.to_string(),
        }
    }

    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
            Error::Csv { .. } => "csv",
            Error::AxisNotMonotonic => "axis_not_monotonic",
            Error::InvalidAxis(_) => "invalid_axis",
            Error::AxisMismatch(_) => "axis_mismatch",
            Error::DuplicateRecord { .. } => "duplicate_record",
            Error::OutOfRange { .. } => "out_of_range",
            Error::NonFinite(_) => "non_finite",
            Error::Empty(_) => "empty",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::ZeroVariance(_) => "zero_variance",
            Error::ZeroDenominator(_) => "zero_denominator",
            Error::NonUniformAxis(_) => "non_uniform_axis",
            Error::IllConditioned(_) => "ill_conditioned",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::SingleClass(_) => "single_class",
            Error::TooFewGroups { .. } => "too_few_groups",
            Error::MixedGroupLabel(_) => "mixed_group_label",
            Error::DegenerateFold(_) => "degenerate_fold",
            Error::EmptyIntersection(_) => "empty_intersection",
            Error::MissingReport(_) => "missing_report",
        }
    }
}
