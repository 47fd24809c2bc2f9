use thiserror::Error;

/// Failure of a subcommand, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] dasgd_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    /// 2 for configuration and validation problems, 3 for divergence,
    /// 1 for anything else (I/O).
    pub fn exit_code(&self) -> u8 {
        use dasgd_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::Diverged { .. }) => 3,
            CliError::Core(E::Io(_)) => 1,
            CliError::Core(_) => 2,
            CliError::Io { .. } => 1,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
