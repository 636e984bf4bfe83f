use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] grauert::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> CliError {
        CliError::Io { path: path.into(), source }
    }

    /// 2 for numerical breakdown, 3 for anything the user has to fix in the
    /// configuration or environment.
    pub fn exit_code(&self) -> i32 {
        use grauert::Error as E;
        match self {
            CliError::Core(E::UnknownModel(_) | E::InvalidParams(_) | E::UnsupportedModel { .. }) => 3,
            CliError::Core(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
