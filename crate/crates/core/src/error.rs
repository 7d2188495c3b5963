use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {details}")]
    Parse { path: PathBuf, details: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: expected {expected_w}x{expected_h}, found {found_w}x{found_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        found_w: usize,
        found_h: usize,
    },

    #[error("invalid camera rig: {0}")]
    InvalidRig(String),

    #[error("unknown label id {0}")]
    UnknownLabel(i32),

    #[error("source class {0} has no entry in the class map")]
    UnmappedClass(u32),

    #[error("mask is empty")]
    EmptyMask,

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("empty label set")]
    EmptyLabelSet,

    #[error("pixel ({x}, {y}) outside {width}x{height} image")]
    PixelOutOfBounds {
        x: i64,
        y: i64,
        width: usize,
        height: usize,
    },

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("missing {source_kind} evidence for frame {frame}, view {view}: {path}")]
    MissingEvidence {
        frame: usize,
        view: usize,
        source_kind: &'static str,
        path: PathBuf,
    },

    #[error("mesh has zero surface area")]
    DegenerateSurface,

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, details: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            details: details.into(),
        }
    }
}
