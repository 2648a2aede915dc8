use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Where a text input went wrong.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    MalformedHeader,
    LineCountMismatch { expected: usize, found: usize },
    FeatureIndexOutOfRange { index: usize, limit: usize },
    LabelIndexOutOfRange { index: usize, limit: usize },
    NonNumeric(String),
    DuplicateFeature(usize),
    DuplicateLabel(usize),
    RaggedRow { expected: usize, found: usize },
}

impl std::fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::MalformedHeader => write!(f, "malformed header, expected \"D N L\""),
            Self::LineCountMismatch { expected, found } => {
                write!(f, "line count mismatch: header declares {expected} rows, found {found}")
            }
            Self::FeatureIndexOutOfRange { index, limit } => {
                write!(f, "feature index {index} out of range (N = {limit})")
            }
            Self::LabelIndexOutOfRange { index, limit } => {
                write!(f, "label index {index} out of range (L = {limit})")
            }
            Self::NonNumeric(tok) => write!(f, "non-numeric token {tok:?}"),
            Self::DuplicateFeature(j) => write!(f, "duplicate feature index {j}"),
            Self::DuplicateLabel(l) => write!(f, "duplicate label {l}"),
            Self::RaggedRow { expected, found } => {
                write!(f, "expected {expected} values, found {found}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {kind}")]
    Parse { line: usize, kind: ParseErrorKind },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{side} Gram matrix of order {order} needs {bytes} bytes, over the {budget}-byte budget; {advice}")]
    Capacity {
        side: &'static str,
        order: usize,
        bytes: usize,
        budget: usize,
        advice: &'static str,
    },

    #[error("system is not positive definite: factorization failed at pivot {pivot}")]
    Singular { pivot: usize },

    #[error("invalid container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, kind: ParseErrorKind) -> Self {
        Error::Parse { line, kind }
    }

    pub fn mismatch(context: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            found,
        }
    }
}
