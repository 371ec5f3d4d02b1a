use thiserror::Error;

/// Errors produced by graph ingestion, model construction, and solvers.
///
/// The variants map onto the CLI exit codes: parse failures (1),
/// validation and domain errors (2), and non-convergence (3).
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{0}")]
    Validation(String),

    #[error("{0}")]
    Domain(String),

    #[error("power iteration did not converge within {max_iter} iterations (last residual {residual:.3e})")]
    NonConvergence { max_iter: u64, residual: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Io(_) => 1,
            Error::Validation(_) | Error::Domain(_) => 2,
            Error::NonConvergence { .. } => 3,
        }
    }
}
