use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the condensation toolkit.
#[derive(Debug, Error)]
pub enum CgcError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("adjacency is not symmetric: edge ({row}, {col}) has no mirror with equal weight")]
    NotSymmetric { row: usize, col: usize },

    #[error("invalid structure: {0}")]
    Structure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("class {class} has no training nodes")]
    MissingClass { class: usize },

    #[error("cannot form {clusters} clusters from {points} points in class {class}; raise the augmentation percentage p or lower the condensation ratio")]
    TooFewPoints {
        class: usize,
        clusters: usize,
        points: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("size mismatch for {file}: expected {expected} bytes, found {actual}")]
    SizeMismatch {
        file: String,
        expected: u64,
        actual: u64,
    },

    #[error("masks overlap: node {node} is in both {first} and {second}")]
    MaskOverlap {
        node: usize,
        first: &'static str,
        second: &'static str,
    },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("node index {index} out of range for {num_nodes} nodes ({context})")]
    IndexOutOfRange {
        index: usize,
        num_nodes: usize,
        context: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl CgcError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CgcError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical kernels (factorizations, divergence).
    pub fn is_numerical(&self) -> bool {
        matches!(self, CgcError::Numerical(_))
    }

    /// True for failures caused by input data (files, formats, labels).
    pub fn is_data(&self) -> bool {
        matches!(
            self,
            CgcError::NotSymmetric { .. }
                | CgcError::Structure(_)
                | CgcError::MissingClass { .. }
                | CgcError::VersionMismatch { .. }
                | CgcError::SizeMismatch { .. }
                | CgcError::MaskOverlap { .. }
                | CgcError::Parse { .. }
                | CgcError::IndexOutOfRange { .. }
                | CgcError::Io { .. }
                | CgcError::Json { .. }
        )
    }
}

pub type Result<T, E = CgcError> = std::result::Result<T, E>;
