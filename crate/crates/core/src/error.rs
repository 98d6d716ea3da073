use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed delimited file {path}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("schema error: required column `{column}` not found in header")]
    MissingColumn { column: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("duplicate patent ids: {}", .0.join(", "))]
    DuplicateIds(Vec<String>),

    #[error("class universe is empty after applying exclusion patterns")]
    EmptyUniverse,

    #[error("invalid exclusion pattern `{pattern}`: {message}")]
    Pattern { pattern: String, message: String },

    #[error("invalid period {start}-{end}: start year after end year")]
    InvalidPeriod { start: i32, end: i32 },

    #[error("agent-class matrix has zero grand total")]
    ZeroGrandTotal,

    #[error("unknown measure id `{0}`")]
    UnknownMeasure(String),

    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("correlation needs at least 2 observations, got {0}")]
    TooFewObservations(usize),

    #[error("universe mismatch: {0}")]
    UniverseMismatch(String),

    #[error("eigenvector centrality needs at least one positive edge weight")]
    NoPositiveWeight,

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing artifact {path}: run the `{stage}` stage first")]
    MissingArtifact { stage: String, path: PathBuf },

    #[error("stage `{stage}` failed")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// True when the failure is numerical rather than a data or validation problem.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NoConvergence { .. } => true,
            Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
