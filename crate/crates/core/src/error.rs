//! Error taxonomy shared by the whole crate.
//!
//! Every fallible operation returns [`Error`]. Variants are grouped into three
//! coarse [`ErrorCategory`] values so binaries can map failures to stable exit
//! codes without matching on individual variants.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed text input; carries the 1-based line number.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Node index outside the declared node range.
    #[error("node index {index} out of range for {num_nodes} nodes")]
    IndexRange { index: usize, num_nodes: usize },

    /// Dimension disagreement between two objects that must align.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Train/val/test split violates disjointness or indexing rules.
    #[error("invalid split: {0}")]
    Split(String),

    /// Structurally valid input with semantically invalid content.
    #[error("invalid data: {0}")]
    Data(String),

    /// Caller-supplied parameter outside its documented domain.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// A documented precondition between components was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Numerical failure (divergence, singularity, non-finite values).
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad parameters or configuration.
    Config,
    /// Bad or inconsistent input data.
    Data,
    /// Numerical failure during computation.
    Numeric,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Param(_) | Error::Contract(_) => ErrorCategory::Config,
            Error::Parse { .. }
            | Error::IndexRange { .. }
            | Error::Shape(_)
            | Error::Split(_)
            | Error::Data(_)
            | Error::Io { .. } => ErrorCategory::Data,
            Error::Numeric(_) => ErrorCategory::Numeric,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categories_cover_all_variants() {
        assert_eq!(
            Error::Param("x".into()).category(),
            ErrorCategory::Config
        );
        assert_eq!(
            Error::Contract("x".into()).category(),
            ErrorCategory::Config
        );
        assert_eq!(Error::Data("x".into()).category(), ErrorCategory::Data);
        assert_eq!(Error::Shape("x".into()).category(), ErrorCategory::Data);
        assert_eq!(Error::Split("x".into()).category(), ErrorCategory::Data);
        assert_eq!(
            Error::IndexRange {
                index: 9,
                num_nodes: 3
            }
            .category(),
            ErrorCategory::Data
        );
        assert_eq!(
            Error::parse("f.txt", 2, "bad").category(),
            ErrorCategory::Data
        );
        assert_eq!(
            Error::Numeric("x".into()).category(),
            ErrorCategory::Numeric
        );
    }

    #[test]
    fn parse_error_message_has_path_and_line() {
        let e = Error::parse("edges.txt", 17, "expected `u v`");
        assert_eq!(e.to_string(), "edges.txt:17: expected `u v`");
    }
}
