use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("node {node} out of range for a graph with {num_nodes} nodes")]
    NodeOutOfRange { node: usize, num_nodes: usize },

    #[error("node {node} appears in both the {first} and {second} masks")]
    MaskOverlap {
        node: usize,
        first: &'static str,
        second: &'static str,
    },

    #[error("node {node} has label {label}, expected a class below {num_classes}")]
    LabelOutOfRange {
        node: usize,
        label: usize,
        num_classes: usize,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value produced by {0}")]
    NumericFault(&'static str),

    #[error("invalid rate {0}: rates must be finite and strictly positive")]
    InvalidRate(f64),

    #[error("time must be finite and non-negative, got {0}")]
    InvalidTime(f64),

    #[error("mask selects no nodes")]
    EmptyMask,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("header says {key}={declared} but the file contains {found}")]
    StatsMismatch {
        key: &'static str,
        declared: usize,
        found: usize,
    },

    #[error("checksum mismatch: header has {declared}, content hashes to {computed}")]
    ChecksumMismatch { declared: String, computed: String },

    #[error("class {class} has {available} nodes, {required} are needed for the split")]
    ClassTooSmall {
        class: usize,
        available: usize,
        required: usize,
    },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
