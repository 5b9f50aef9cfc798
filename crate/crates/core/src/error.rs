use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("line {line}: decay rate must be nonzero")]
    ZeroDecayRate { line: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid time series: {0}")]
    InvalidSeries(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model is unstable; a final-value band is undefined")]
    Unstable,

    #[error("steady-state value is zero; the final-value band is degenerate")]
    DegenerateBand,

    #[error("sample standard deviation is zero")]
    ZeroDeviation,

    #[error("departure rate is zero")]
    ZeroRate,

    #[error("time grids differ: {0}")]
    GridMismatch(String),

    #[error("input is identically zero")]
    ZeroInput,

    #[error("cleanup overruns setup: previous output is still {value} at kick-off t={kickoff}")]
    CleanupOverlap { kickoff: f64, value: f64 },

    #[error("no kick-off found: input never becomes positive")]
    NoKickoff,

    #[error("rank correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("{path}: {message}")]
    Ingest { path: String, message: String },

    #[error("{path}: row {row}: {message}")]
    Row { path: String, row: usize, message: String },

    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("fit failed: {0}")]
    FitFailed(String),
}

impl Error {
    /// Errors not attributable to user input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::FitFailed(_))
    }

    pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
