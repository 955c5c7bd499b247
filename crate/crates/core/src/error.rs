use std::path::PathBuf;

/// Errors raised by the diffusion, geometry, dataset and metric routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("invalid shape {0:?}")]
    InvalidShape(Vec<usize>),

    #[error("timestep {t} outside [{min}, {max}]")]
    TimestepOutOfRange { t: usize, min: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown condition `{name}`; vocabulary: {vocabulary}")]
    UnknownCondition { name: String, vocabulary: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("mask is not binary at index {index} (value {value})")]
    NonBinaryMask { index: usize, value: f64 },

    #[error("blend weights violate the sum-to-one constraint at pixel ({row}, {col}): sum {sum}")]
    BlendConstraint { row: usize, col: usize, sum: f64 },

    #[error("missing latent code for stochastic step t={0}")]
    MissingCode(usize),

    #[error("{path}: parse error at byte {offset}: {message}")]
    Parse {
        path: PathBuf,
        offset: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("manifest references missing files: {}", .0.join(", "))]
    MissingFiles(Vec<String>),

    #[error("model file: {0}")]
    ModelFile(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
