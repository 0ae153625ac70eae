use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("image has no foreground pixels")]
    NoForeground,

    #[error("cropped image is {width}x{height}, smaller than a {n}x{n} grid")]
    ImageTooSmall { width: usize, height: usize, n: usize },

    #[error("{path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("{path}, line {line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("dimension mismatch: expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("training data needs at least two classes, found {0}")]
    SingleClass(usize),

    #[error("non-finite feature value at sample {sample}, feature {feature}")]
    NonFinite { sample: usize, feature: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("class `{label}` has {count} samples, fewer than the required {required}")]
    ClassTooSmall {
        label: String,
        count: usize,
        required: usize,
    },

    #[error("unsupported model file version {found} (this build reads version {supported})")]
    ModelVersion { found: u32, supported: u32 },

    #[error("corrupt model file: {0}")]
    ModelCorrupt(String),

    #[error("{path}: {source}")]
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
