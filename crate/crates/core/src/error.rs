use std::path::{Path, PathBuf};

/// Errors produced by the core library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to decode image {path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("failed to encode image {path}: {source}")]
    Encode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error{}: {message}", display_in(path))]
    Parse {
        path: Option<PathBuf>,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("fatal client configuration error: {0}")]
    ClientConfig(String),
}

fn display_in(path: &Option<PathBuf>) -> String {
    match path {
        Some(p) => format!(" in {}", p.display()),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse {
            path: None,
            message: msg.into(),
        }
    }

    /// Attaches a file path to a [`Error::Parse`]; other variants pass
    /// through unchanged.
    pub(crate) fn with_path(self, path: impl AsRef<Path>) -> Self {
        match self {
            Error::Parse { message, .. } => Error::Parse {
                path: Some(path.as_ref().to_path_buf()),
                message,
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
