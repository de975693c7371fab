use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("matrix is numerically singular (smallest eigenvalue {eigenvalue:e})")]
    Singular { eigenvalue: f64 },

    #[error("target at endfire (|theta| = 90 deg): the angle derivative vanishes")]
    Endfire,

    #[error("degenerate noise subspace: K = {k} requires more than {m} sensing elements")]
    DegenerateSubspace { k: usize, m: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no usable records to aggregate")]
    EmptyResult,

    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("CSV error on {path}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    /// Configuration-class errors map to exit code 2 in the CLI, everything
    /// numerical to 3.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Parse { .. } | Error::Io { .. } | Error::Csv { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
