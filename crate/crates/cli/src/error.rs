//! CLI error type with the documented exit-code mapping.

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad config, bad arguments, unparseable trace: exit 1.
    #[error("{0}")]
    Validation(String),

    /// A post-hoc invariant check failed: exit 2.
    #[error("{0}")]
    CheckFailed(String),

    /// Filesystem trouble: exit 3.
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::CheckFailed(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn io(context: &str, err: std::io::Error) -> CliError {
        CliError::Io(format!("{context}: {err}"))
    }
}
