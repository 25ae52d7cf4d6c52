use thiserror::Error;

/// Errors raised by mesh construction, assembly and the solvers.
#[derive(Debug, Error)]
pub enum LodError {
    /// Invalid parameters or inconsistent inputs; nothing was solved.
    #[error("configuration error: {0}")]
    Config(String),
    #[error("index {index} out of range (size {size})")]
    Index { index: usize, size: usize },
    /// A factorization or solve failed or did not reach its residual target.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl LodError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        LodError::Config(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        LodError::Numerical(msg.into())
    }

    /// Process exit status used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            LodError::Config(_) | LodError::Index { .. } => 2,
            LodError::Numerical(_) => 3,
            LodError::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, LodError>;
