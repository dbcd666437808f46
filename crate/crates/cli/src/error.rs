use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config, flags or input schema. Nothing was computed.
    #[error("config error: {0}")]
    Config(String),
    #[error("computation failed: {0}")]
    Compute(#[from] usf_radar_core::Error),
    /// One or more experiment strategies failed; the others were written.
    #[error("{} strateg{} failed: {}", .0.len(), if .0.len() == 1 { "y" } else { "ies" }, join(.0))]
    Partial(Vec<usf_radar_core::Error>),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn join(errors: &[usf_radar_core::Error]) -> String {
    errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) | CliError::Partial(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
