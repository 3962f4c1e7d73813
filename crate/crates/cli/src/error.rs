use std::path::PathBuf;

use georisk_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numerical failure: {0}")]
    Numerical(#[from] CoreError),

    #[error("run failed the validity gate: {0}")]
    Validity(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::Numerical(_) => 4,
            CliError::Validity(_) => 5,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

/// Sorts a core error into the data or numerical bucket.
pub(crate) fn classify(e: CoreError) -> CliError {
    match e.root() {
        CoreError::DuplicateLocation { .. } | CoreError::DegenerateBounds { .. } => CliError::Data(e.to_string()),
        CoreError::InvalidScenario(m) => CliError::Config(m.clone()),
        _ => CliError::Numerical(e),
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
