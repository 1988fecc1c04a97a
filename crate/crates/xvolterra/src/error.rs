use std::path::PathBuf;

use thiserror::Error;
use xvolterra_core::error::{ExtractError, KernelError, ProbeError, SynthError, SystemError};

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: expected a `{expected}` file, found `{found}`")]
    WrongKind {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path}: unsupported format version {version} (this build reads {supported}.x)")]
    UnsupportedVersion {
        path: PathBuf,
        version: String,
        supported: u32,
    },
    #[error("malformed data: {0}")]
    Malformed(String),
    #[error("dataset is missing {count} entries needed by the extractor, first: {}", first.join("; "))]
    MissingEntries { count: usize, first: Vec<String> },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    System(#[from] SystemError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl Error {
    /// Process exit status: 3 for bad or incomplete inputs, 2 for plans
    /// failing collision checks, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::Json { .. }
            | Error::WrongKind { .. }
            | Error::UnsupportedVersion { .. }
            | Error::Malformed(_)
            | Error::MissingEntries { .. }
            | Error::Config(_)
            | Error::Csv(_) => 3,
            Error::Probe(ProbeError::InvalidPlan(_)) => 2,
            Error::Probe(ProbeError::AmplitudeAboveBound { .. }) => 3,
            Error::Extract(
                ExtractError::MissingEntry { .. }
                | ExtractError::Incomplete { .. }
                | ExtractError::OrderAbovePlan { .. },
            ) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
