use thiserror::Error;

/// Failure of a CLI command, carrying its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ggrician::Error),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("cannot write JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for caller mistakes, 3 for estimation failures, 4 for file problems.
    pub fn exit_code(&self) -> i32 {
        use ggrician::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(E::Usage(_) | E::Domain(_)) => 2,
            CliError::Core(E::Init(_) | E::Degenerate(_) | E::Numerical(_)) => 3,
            CliError::Core(E::Io(_) | E::Parse { .. }) => 4,
            CliError::Json(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;
