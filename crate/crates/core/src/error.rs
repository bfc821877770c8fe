use std::path::PathBuf;

use crate::annotate::Judgement;

/// Errors produced anywhere in the toolkit.
///
/// Variants map onto the CLI exit codes: validation-style failures exit 1,
/// runtime failures (solver breakdown, I/O) exit 2. See [`Error::is_validation`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid value {value} at pixel ({x}, {y}) channel {channel}: {reason}")]
    InvalidPixel {
        x: usize,
        y: usize,
        channel: usize,
        value: f64,
        reason: &'static str,
    },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("length mismatch in {context}: {left} vs {right}")]
    LengthMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },
    #[error("mask has no observed pixels")]
    EmptyMask,
    #[error("conjugate gradient stopped after {iterations} iterations at relative residual {residual:e}")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("objective evaluated to a non-finite value ({context})")]
    NonFinite { context: &'static str },
    #[error("need at least 2 points for pairing, got {0}")]
    DegenerateGeometry(usize),
    #[error("expected exactly 5 annotator answers, got {0}")]
    WrongAnswerCount(usize),
    #[error("no annotations with positive total weight")]
    EmptyAnnotations,
    #[error("judgement class {0} is absent")]
    MissingClass(Judgement),
    #[error("a marginal has zero variance")]
    DegenerateVariance,
    #[error("point ({x}, {y}) outside {width}x{height} image")]
    OutOfBounds {
        x: i64,
        y: i64,
        width: usize,
        height: usize,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input rather than a failed computation.
    /// A missing input file counts as bad input; other I/O failures do not.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            Error::NonConvergence { .. } | Error::NonFinite { .. } | Error::Image { .. } => false,
            _ => true,
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
