use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] popver_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("protocol file does not match the schema:\n  {}", .0.join("\n  "))]
    Schema(Vec<String>),
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 3 for exhausted budgets, 1 when the checker contradicts itself, and 2
    /// for everything the caller got wrong.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_resource() => 3,
            CliError::Core(popver_core::Error::VerdictMismatch { .. }) => 1,
            _ => 2,
        }
    }
}
