use thiserror::Error;

/// Errors raised by the laboratory.
///
/// Every variant maps onto a stable integer code (see [`Error::code`]) which
/// the C interface hands back to callers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("basis construction failed: {0}")]
    Construction(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("estimate not integrable: {0}")]
    Integrability(String),

    #[error("unstable estimate: {0}")]
    Instability(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn code(&self) -> i32 {
        match self {
            Error::Argument(_) => 2,
            Error::Dimension { .. } => 3,
            Error::Construction(_) => 4,
            Error::Range(_) => 5,
            Error::Precondition(_) => 6,
            Error::Hypothesis(_) => 7,
            Error::Integrability(_) => 8,
            Error::Instability(_) => 9,
            Error::Config(_) => 10,
            Error::Io(_) => 11,
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
