use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("unsupported file format: {0}")]
    UnsupportedFormat(String),

    #[error("malformed binary file: {0}")]
    Format(String),

    #[error("mesh has no valid faces")]
    EmptyMesh,

    #[error("point cloud is degenerate: {0}")]
    DegenerateCloud(String),

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("requested k = {k} but the cloud has only {len} points")]
    KTooLarge { k: usize, len: usize },

    #[error("operation requires {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("point cloud carries no normals")]
    MissingNormals,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("sensor {sensor} coincides with point {point}")]
    SensorCoincidesWithPoint { sensor: usize, point: usize },

    #[error("all points were masked out of the partial observation")]
    EmptyPartial,

    #[error("normal field has no confident voxels")]
    NoConfidentVoxels,

    #[error("no candidates to process")]
    NoCandidates,

    #[error("completer failed on candidate {index}: {source}")]
    CompleterFailure {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("timed out waiting for a response to request {id}")]
    Timeout { id: String },

    #[error("exchange protocol error: {0}")]
    Protocol(String),

    #[error("remote completer reported failure for {id}: {message}")]
    RemoteFailure { id: String, message: String },

    #[error("dimension must be positive, got {0}")]
    NonPositiveDimension(f64),

    #[error("no loadable meshes in {0}")]
    NoMeshes(PathBuf),

    #[error("no scenes in {0}")]
    NoScenes(PathBuf),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, looking through stage and per-candidate wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } | Error::CompleterFailure { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_protocol(&self) -> bool {
        matches!(
            self.root(),
            Error::Timeout { .. } | Error::Protocol(_) | Error::RemoteFailure { .. }
        )
    }

    pub fn is_config(&self) -> bool {
        matches!(self.root(), Error::Config(_))
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
