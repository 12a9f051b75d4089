use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] gasmono_core::Error),
}

impl CliError {
    /// Process exit code: 3 when no certificate exists or the solver blew up,
    /// 1 for everything caused by the input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Core(
                gasmono_core::Error::NoCertificate(_)
                | gasmono_core::Error::Diverged { .. }
                | gasmono_core::Error::ProjectionNotConverged { .. },
            ) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
