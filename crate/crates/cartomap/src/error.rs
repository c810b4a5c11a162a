use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] cartomap_core::Error),
    #[error("{0}")]
    Input(String),
    #[error("line {line}: {message}")]
    Line { line: u64, message: String },
    #[error("missing output of stage '{stage}' ({path}); run `cartomap {stage}` first")]
    MissingStage { stage: &'static str, path: PathBuf },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Exit status: 1 for problems with the user's input or invocation,
    /// 2 for failures of the program or environment.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Core(cartomap_core::Error::Divergent(_)) => 2,
            _ => 1,
        }
    }
}
