use std::path::PathBuf;

use thiserror::Error;

/// Error type shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("file size {size} is not a multiple of the {width}x{height} 4:2:0 frame footprint ({footprint} bytes)")]
    SizeMismatch {
        size: u64,
        width: usize,
        height: usize,
        footprint: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("data format error: {0}")]
    DataFormat(String),

    #[error("model format version {found} is not supported (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("dataset contains a single class; at least two are required")]
    SingleClass,

    #[error("class {0} has no samples")]
    MissingClass(String),

    #[error("missing score: observer {observer}, sequence {sequence}, condition {condition}")]
    MissingScore {
        observer: String,
        sequence: String,
        condition: String,
    },

    #[error("missing condition {condition} for sequence {sequence}")]
    MissingCondition {
        sequence: String,
        condition: String,
    },

    #[error("sample of size {0} is too small; need at least 2 values")]
    UndersizedSample(usize),

    #[error("timeline inconsistent with video: {0}")]
    TimelineMismatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-parsable class name, also used to pick the CLI exit code.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "usage",
            Error::ModelVersion { .. } => "model-version",
            _ => "data-format",
        }
    }

    /// CLI exit code: 2 usage, 3 data-format, 4 model-version.
    pub fn exit_code(&self) -> i32 {
        match self.class() {
            "usage" => 2,
            "model-version" => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
