use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] gneiting_core::Error),
    #[error("circulant embedding failed: lambda_min/lambda_max = {lambda_min:e}, clip threshold {threshold:e}")]
    EmbeddingFailed { lambda_min: f64, threshold: f64 },
    #[error("grid has {nodes} nodes, cap is {cap}")]
    GridTooLarge { nodes: usize, cap: usize },
    #[error("lag {0:?} does not fit on the grid")]
    OffGrid(Vec<isize>),
    #[error("config: {0}")]
    Config(String),
    #[error("replicate {index}: {source}")]
    Replicate { index: usize, source: Box<Error> },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code: 2 for configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use gneiting_core::Error as C;
        match self {
            Error::Config(_) | Error::Json(_) | Error::OffGrid(_) | Error::GridTooLarge { .. } => 2,
            Error::Core(C::InvalidParams(_) | C::InvalidAlpha { .. } | C::Unsupported(_)) => 2,
            Error::Replicate { source, .. } => source.exit_code(),
            Error::Io { .. } => 2,
            _ => 3,
        }
    }
}
