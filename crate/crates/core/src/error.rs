use thiserror::Error;

/// Errors produced by the library.
///
/// The CLI maps `Io` to exit code 3 and everything else to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate posterior: every hypothesis assigns zero likelihood to the observed data")]
    DegeneratePosterior,

    #[error("lambda schedule undefined for K = {0} (log K must be positive); use a fixed lambda")]
    Schedule(usize),

    #[error("exact mutual information needs {outcomes} outcomes (limit {limit}); switch mi_mode to mc")]
    Infeasible { outcomes: u128, limit: u128 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn parse(path: impl AsRef<std::path::Path>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.as_ref().display().to_string(),
            message: message.to_string(),
        }
    }

    /// Process exit code used by the CLI for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
