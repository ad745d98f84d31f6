use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report. The `kind()` string is the stable
/// identifier used in CLI output and tests.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate-signal: {0}")]
    DegenerateSignal(String),
    #[error("bad-plant-config: {0}")]
    BadPlantConfig(String),
    #[error("bad-dims: {0}")]
    BadDims(String),
    #[error("motion-out-of-canvas: frame {frame} needs {needed:.3} px of margin, canvas has {available}")]
    MotionOutOfCanvas {
        frame: usize,
        needed: f64,
        available: usize,
    },
    #[error("not-a-dataset: {}", .0.display())]
    NotADataset(PathBuf),
    #[error("corrupt-dataset: {0}")]
    CorruptDataset(String),
    #[error("inconsistent-dataset: {0}")]
    InconsistentDataset(String),
    #[error("degenerate-axis: {0}")]
    DegenerateAxis(String),
    #[error("bad-window: {0}")]
    BadWindow(String),
    #[error("too-few-points: {points} points for {k} clusters")]
    TooFewPoints { points: usize, k: usize },
    #[error("misaligned-tracks: {features} features but {tracks} tracks")]
    MisalignedTracks { features: usize, tracks: usize },
    #[error("parse-error at token {position} ({token:?}): {reason}")]
    Parse {
        position: usize,
        token: String,
        reason: String,
    },
    #[error("shape-error: {0}")]
    Shape(String),
    #[error("empty-data: {0}")]
    EmptyData(String),
    #[error("bad-unit: {0}")]
    BadUnit(String),
    #[error("too-few-participants: need at least 3, found {0}")]
    TooFewParticipants(usize),
    #[error("invalid-config: {0}")]
    InvalidConfig(String),
    #[error("numeric-failure: {0}")]
    Numeric(String),
    #[error("io-error: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Broad failure classes, used for CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateSignal(_) => "degenerate-signal",
            Error::BadPlantConfig(_) => "bad-plant-config",
            Error::BadDims(_) => "bad-dims",
            Error::MotionOutOfCanvas { .. } => "motion-out-of-canvas",
            Error::NotADataset(_) => "not-a-dataset",
            Error::CorruptDataset(_) => "corrupt-dataset",
            Error::InconsistentDataset(_) => "inconsistent-dataset",
            Error::DegenerateAxis(_) => "degenerate-axis",
            Error::BadWindow(_) => "bad-window",
            Error::TooFewPoints { .. } => "too-few-points",
            Error::MisalignedTracks { .. } => "misaligned-tracks",
            Error::Parse { .. } => "parse-error",
            Error::Shape(_) => "shape-error",
            Error::EmptyData(_) => "empty-data",
            Error::BadUnit(_) => "bad-unit",
            Error::TooFewParticipants(_) => "too-few-participants",
            Error::InvalidConfig(_) => "invalid-config",
            Error::Numeric(_) => "numeric-failure",
            Error::Io { .. } => "io-error",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parse { .. }
            | Error::InvalidConfig(_)
            | Error::BadUnit(_)
            | Error::BadWindow(_)
            | Error::BadDims(_)
            | Error::BadPlantConfig(_) => ErrorClass::Usage,
            Error::DegenerateSignal(_) | Error::Numeric(_) | Error::DegenerateAxis(_) => ErrorClass::Numeric,
            _ => ErrorClass::Data,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
