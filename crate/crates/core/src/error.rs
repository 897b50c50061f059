use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),

    #[error("candidate does not fit search space: {0}")]
    CandidateMismatch(String),

    #[error("malformed one-hot segment for variable {variable}: {ones} bits set")]
    MalformedOneHot { variable: usize, ones: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("enumeration of {combinations} combinations exceeds cap of {cap}")]
    CapExceeded { combinations: u128, cap: u128 },

    #[error("array parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("array failed validation: {0}")]
    Validation(String),

    #[error("{what} index {index} out of range (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("cannot merge columns: {0}")]
    Merge(String),

    #[error("array does not match search space: {0}")]
    ArrayMismatch(String),

    #[error("population is empty")]
    EmptyPopulation,

    #[error("insufficient traffic: {total} impressions for {required} slots")]
    InsufficientTraffic { total: u64, required: u64 },

    #[error("no observed impressions to build a prior from")]
    NoImpressions,

    #[error("quadrature did not converge: estimated error {error:e} after {intervals} intervals")]
    Quadrature { error: f64, intervals: usize },

    #[error("numerical error: {0}")]
    Numeric(String),

    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },

    #[error("nothing to plot")]
    EmptySeries,

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("failed to read config: {0}")]
    ConfigFormat(#[from] toml::de::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
