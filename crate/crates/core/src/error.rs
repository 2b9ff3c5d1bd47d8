use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate fixation record: image {image_id}, subject {subject_id}, condition {condition}, fix_index {fix_index}")]
    DuplicateRecord {
        image_id: String,
        subject_id: String,
        condition: String,
        fix_index: u32,
    },

    #[error("invalid annotation for image {image_id}: {message}")]
    Validation { image_id: String, message: String },

    #[error("scan path {0} is already preprocessed")]
    AlreadyPreprocessed(String),

    #[error("scan path {0} is empty after preprocessing")]
    EmptyPath(String),

    #[error("scan path {id} is too short: {len} fixation(s), need at least {need}")]
    TooShort { id: String, len: usize, need: usize },

    #[error("image {0} has no target objects")]
    NoTargets(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("image of {width}x{height} is smaller than the {patch}px patch")]
    ImageTooSmall {
        width: usize,
        height: usize,
        patch: usize,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("missing gaze data for {} image(s): {}", .0.len(), .0.join(", "))]
    Coverage(Vec<String>),

    #[error("unknown scan path reference: image {0} has no annotation")]
    UnknownImage(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
