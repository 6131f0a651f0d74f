use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("video `{0}` has no frames")]
    EmptyVideo(String),

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("landmark track has no rows")]
    EmptyTrack,

    #[error("invalid interval at row {row}: {message}")]
    InvalidInterval { row: usize, message: String },

    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate face: inner eye corners coincide")]
    DegenerateFace,

    #[error("ROI {roi_id} falls outside the {width}x{height} frame")]
    RoiOutOfFrame {
        roi_id: usize,
        width: u32,
        height: u32,
    },

    #[error("temporal PCA needs at least 2 frames, got {0}")]
    TooFewFrames(usize),

    #[error("block of {width}x{height} is too small for LBP radius {radius}")]
    BlockTooSmall {
        width: usize,
        height: usize,
        radius: usize,
    },

    #[error("video of {frames} frames is too short for interval {interval}")]
    VideoTooShort { frames: usize, interval: usize },

    #[error("leave-one-subject-out needs at least 2 subjects, got {0}")]
    NeedMultipleSubjects(usize),

    #[error("training set contains a single class")]
    DegenerateTrainingSet,

    #[error("synthetic spec error: {0}")]
    Spec(String),

    #[error("model file error: {0}")]
    Model(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
