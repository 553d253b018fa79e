use std::path::{Path, PathBuf};

use attriboost_core::Error as CoreError;

pub type Result<T, E = AppError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("trial {trial}: {source}")]
    Trial {
        trial: u64,
        #[source]
        source: Box<AppError>,
    },
}

impl AppError {
    pub fn io(path: &Path, source: std::io::Error) -> AppError {
        AppError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code: 2 config, 3 oracle, 4 data, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Data(_) | AppError::Io { .. } => 4,
            AppError::Trial { source, .. } => source.exit_code(),
            AppError::Core(e) => {
                if e.is_oracle() {
                    return 3;
                }
                match e.root() {
                    CoreError::Config(_) => 2,
                    CoreError::Dataset(_)
                    | CoreError::DuplicateId(_)
                    | CoreError::Model(_)
                    | CoreError::Cache(_)
                    | CoreError::SamplingStalled { .. } => 4,
                    _ => 1,
                }
            }
        }
    }
}
