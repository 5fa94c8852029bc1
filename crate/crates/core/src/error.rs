use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad class of a failure, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("index out of range: {index} >= {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("unknown character {0:?} not in alphabet")]
    UnknownCharacter(char),
    #[error("invalid level set: {0}")]
    InvalidLevels(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("input too small for pyramid: {0}")]
    InputTooSmall(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate output: norm below {0:e}")]
    DegenerateOutput(f64),
    #[error("zero-norm label")]
    ZeroNormLabel,
    #[error("zero-norm vector")]
    ZeroNormVector,
    #[error("empty gallery")]
    EmptyGallery,
    #[error("no queries")]
    NoQueries,
    #[error("no relevant item: {0}")]
    NoRelevant(String),
    #[error("degenerate augmentation transform after {0} attempts")]
    DegenerateTransform(usize),
    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    Divergence { iteration: u64, loss: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("image error: {0}")]
    Image(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) | Error::InvalidLevels(_) => {
                ErrorCategory::Config
            }
            Error::DegenerateOutput(_)
            | Error::ZeroNormLabel
            | Error::ZeroNormVector
            | Error::Divergence { .. }
            | Error::DegenerateTransform(_) => ErrorCategory::Numeric,
            _ => ErrorCategory::Data,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}

impl From<image::ImageError> for Error {
    fn from(e: image::ImageError) -> Self {
        Error::Image(e.to_string())
    }
}
