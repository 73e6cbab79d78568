use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the codec.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {actual_w}x{actual_h}{}", context_suffix(.context))]
    DimensionMismatch {
        expected_w: u32,
        expected_h: u32,
        actual_w: u32,
        actual_h: u32,
        context: Option<String>,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("inconsistent data: {0}")]
    Inconsistent(String),

    #[error("corrupt stream ({check}): {detail}")]
    CorruptStream { check: &'static str, detail: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt chunk for GOP {gop}: {source}")]
    CorruptChunk {
        gop: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("key-frame codec failure: {0}")]
    KeyCodec(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{}: {detail}", path.display())]
    Video { path: PathBuf, detail: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn context_suffix(context: &Option<String>) -> String {
    match context {
        Some(c) => format!(" ({c})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn corrupt(check: &'static str, detail: impl Into<String>) -> Self {
        Error::CorruptStream {
            check,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
