use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;
use xling_core::acoustic::ModelError;
use xling_core::corpus::CorpusError;
use xling_core::features::FeatureError;
use xling_core::lexicon::LexiconError;
use xling_core::matrix::MatrixError;
use xling_core::regulator::RegulatorError;

/// Every failure the command line can report. `origin` names the file or
/// flag the failing input came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {detail}", path.display())]
    Format { path: PathBuf, detail: String },
    #[error("{}: {detail}", path.display())]
    Wav { path: PathBuf, detail: String },
    #[error("{origin}:{line}: {detail}")]
    Config {
        origin: String,
        line: usize,
        detail: String,
    },
    #[error("{0}")]
    Usage(String),
    #[error("{origin}: {source}")]
    Lexicon { origin: String, source: LexiconError },
    #[error("{origin}: {source}")]
    Regulator { origin: String, source: RegulatorError },
    #[error("{origin}: {source}")]
    Feature { origin: String, source: FeatureError },
    #[error("{origin}: {source}")]
    Model { origin: String, source: ModelError },
    #[error("{origin}: {source}")]
    Corpus { origin: String, source: CorpusError },
    #[error("{origin}: {source}")]
    Matrix { origin: String, source: MatrixError },
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "IoError",
            Error::Format { .. } => "FormatError",
            Error::Wav { .. } => "WavError",
            Error::Config { .. } => "ConfigError",
            Error::Usage(_) => "UsageError",
            Error::Lexicon { source, .. } => source.code(),
            Error::Regulator { source, .. } => source.code(),
            Error::Feature { source, .. } => source.code(),
            Error::Model { source, .. } => source.code(),
            Error::Corpus { source, .. } => source.code(),
            Error::Matrix {
                source: MatrixError::NonFinite { .. },
                ..
            } => "NonFinite",
            Error::Matrix { .. } => "ShapeMismatch",
        }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.to_path_buf(),
            detail: detail.into(),
        }
    }

    pub fn config(origin: impl Into<String>, line: usize, detail: impl Into<String>) -> Self {
        Error::Config {
            origin: origin.into(),
            line,
            detail: detail.into(),
        }
    }
}

/// Attaches an origin to a core error.
pub trait Context<T> {
    fn at(self, origin: impl std::fmt::Display) -> Result<T, Error>;
}

macro_rules! context_impl {
    ($err:ty, $variant:ident) => {
        impl<T> Context<T> for Result<T, $err> {
            fn at(self, origin: impl std::fmt::Display) -> Result<T, Error> {
                self.map_err(|source| Error::$variant {
                    origin: origin.to_string(),
                    source,
                })
            }
        }
    };
}

context_impl!(LexiconError, Lexicon);
context_impl!(RegulatorError, Regulator);
context_impl!(FeatureError, Feature);
context_impl!(ModelError, Model);
context_impl!(CorpusError, Corpus);
context_impl!(MatrixError, Matrix);

pub type Result<T, E = Error> = std::result::Result<T, E>;
