use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate mask: {0}")]
    DegenerateMask(&'static str),

    #[error("non-positive disparity {disparity:.4} px (floor {floor} px)")]
    NonPositiveDisparity { disparity: f64, floor: f64 },

    #[error("point is behind the camera (z = {z})")]
    BehindCamera { z: f64 },

    #[error("quaternion norm {norm} is not unit")]
    NonUnitQuaternion { norm: f64 },

    #[error("bipartite graph has an empty side")]
    EmptySide,

    #[error("back-end failure: {0}")]
    BackendFailure(String),

    #[error("insufficient overlap: {found} correspondences")]
    InsufficientOverlap { found: usize },

    #[error("degenerate correspondence geometry")]
    Degenerate,

    #[error("no ground truth available")]
    NoGroundTruth,

    #[error("missing ground truth for frame {0}")]
    MissingGroundTruth(usize),

    #[error("empty input")]
    EmptyInput,

    #[error("missing input: {0}")]
    MissingInput(&'static str),

    #[error("frame mismatch: {0}")]
    FrameMismatch(String),

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("malformed {what}: {reason}")]
    Parse { what: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn parse(what: impl Into<String>, reason: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            reason: reason.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
