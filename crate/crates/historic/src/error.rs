use std::path::PathBuf;

use thiserror::Error;

/// Failures of a run, each with its exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),
    /// A requested check failed; details are in the transcript.
    #[error("check failed: {stage} (transcript: {})", transcript.display())]
    Check { stage: String, transcript: PathBuf },
    #[error("{0}")]
    Runtime(String),
    #[error("cannot write {}: {source}", path.display())]
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
            CliError::Check { .. } => 3,
            CliError::Runtime(_) | CliError::Io { .. } => 1,
        }
    }

    /// Bad input to the engine is a config error; anything else is a
    /// runtime failure.
    pub fn from_core(context: &str, e: historic_core::Error) -> Self {
        use historic_core::Error as E;
        match e {
            E::NonConvergence { .. } | E::Construction(_) => {
                CliError::Runtime(format!("{context}: {e}"))
            }
            _ => CliError::Config(format!("{context}: {e}")),
        }
    }
}
