use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("attribute count {0} out of range (max {1})")]
    Size(usize, usize),

    #[error("index {index} out of range 1..={max}")]
    Index { index: usize, max: usize },

    #[error("empty vector")]
    Dimension,

    #[error("non-finite entry at position {0}")]
    Numeric(usize),

    #[error("stage solver breakdown: {0}")]
    Solver(&'static str),

    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },

    #[error("dataset has no bins")]
    EmptyData,

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("{total} samples cannot be split evenly across {bins} bins")]
    Partition { total: usize, bins: usize },

    #[error("bins would hold zero samples")]
    EmptyBin,

    #[error("stage {stage} needs the estimate for stage {missing}")]
    Dependency { stage: usize, missing: usize },

    #[error("not a stochastic matrix: {0}")]
    NotStochastic(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("run {run}, samples per bin {samples_per_bin}: {source}")]
    Run {
        run: usize,
        samples_per_bin: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, found: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// True for errors caused by invalid caller input rather than by the
    /// environment or the numerics.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Size(..)
            | Error::Index { .. }
            | Error::Dimension
            | Error::Parameter(_)
            | Error::Partition { .. }
            | Error::EmptyBin => true,
            Error::Stage { source, .. } | Error::Run { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
