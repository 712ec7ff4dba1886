use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error class, used for process exit codes and C status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Invalid configuration or arguments.
    Usage,
    /// Filesystem failure.
    Io,
    /// Malformed or inconsistent file/tensor content.
    Format,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("path does not exist: {0}")]
    MissingPath(PathBuf),

    #[error("no frames found in {0}")]
    EmptySequence(PathBuf),

    #[error("frame {index} has size {got_w}x{got_h}, expected {want_w}x{want_h}")]
    FrameSizeMismatch {
        index: usize,
        want_w: usize,
        want_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("unsupported format version {found} (max {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("truncated {what}: expected {expected} bytes, found {found}")]
    Truncated {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("duplicate tensor name {0:?}")]
    DuplicateName(String),

    #[error("missing tensor {0:?}")]
    MissingTensor(String),

    #[error("missing flow file {0}")]
    MissingFlow(PathBuf),

    #[error("format error: {0}")]
    Format(String),

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),

    #[error("io error on {path}: {source}")]
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

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Usage,
            Error::MissingPath(_) | Error::MissingFlow(_) | Error::Io { .. } => ErrorKind::Io,
            Error::Image(image::ImageError::IoError(_)) => ErrorKind::Io,
            _ => ErrorKind::Format,
        }
    }
}
