use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An assumption behind the guarantee does not hold for the instance.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// A projection oracle that is not idempotent, or a similar failure of a
    /// user-supplied object to behave as declared.
    #[error("certification error: {0}")]
    Certification(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code: 2 when the instance violates a hypothesis, 4 on
    /// non-convergence, 1 for input and I/O errors. Failed checks (3) are not
    /// errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Hypothesis(_) | Error::Certification(_) => 2,
            Error::NonConvergence { .. } => 4,
            _ => 1,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn hypothesis(msg: impl Into<String>) -> Self {
        Error::Hypothesis(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
