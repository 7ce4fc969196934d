use thiserror::Error;

/// Failures of a CLI invocation, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] ngmoe::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config file: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 usage, 3 data validation or I/O, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        use ngmoe::Error as E;
        match self {
            CliError::Usage(_) | CliError::Toml(_) => 2,
            CliError::Io(_) | CliError::Json(_) => 3,
            CliError::Core(e) => match e {
                E::Config(_) | E::Empty(_) => 2,
                E::Validation(_) | E::Dimension(_) | E::Io(_) | E::Csv(_) | E::Json(_) => 3,
                E::Domain(_) | E::Pole { .. } | E::NotPositiveDefinite(_) | E::KMeans(_) => 4,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
