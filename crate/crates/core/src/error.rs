use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header: {0}")]
    Parse(String),

    #[error("unsupported rank: NDims = {0}, expected 3")]
    UnsupportedRank(usize),

    #[error("data integrity: {0}")]
    Integrity(String),

    #[error("incompatible grids: {0}")]
    GridMismatch(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("index {index} out of range for {len} slices")]
    SliceOutOfRange { index: usize, len: usize },

    #[error("malformed detection at line {line}: {message}")]
    DetectionLine { line: usize, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
