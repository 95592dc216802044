use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("point is behind the camera (depth {depth})")]
    BehindCamera { depth: f64 },
    #[error("point has zero depth in the camera frame")]
    ZeroDepth,
    #[error("viewing ray does not reach the ground plane (grazing angle {grazing_deg:.3} deg)")]
    DegenerateRay { grazing_deg: f64 },
    #[error("camera height must be > 0, got {0}")]
    InvalidHeight(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("covariance is not symmetric positive-definite")]
    NotPositiveDefinite,
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("empty log")]
    EmptyLog,
    #[error("timestamps not strictly increasing at record {index}")]
    NonMonotoneTime { index: usize },

    #[error("all particle weights are zero (track lost)")]
    TrackLost,
    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("not enough points: need at least {need}, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("trajectories share no annotated frame")]
    NoCommonFrames,

    #[error("swarm leaves the image at frame {frame}")]
    SwarmOutOfFrame { frame: usize },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: byte {offset}: {message}")]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad configuration or usage rather than a
    /// runtime failure.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Json(_))
    }
}
