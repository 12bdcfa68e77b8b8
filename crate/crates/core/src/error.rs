use std::path::PathBuf;

/// Errors raised anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("degenerate basis: column {column} is numerically dependent on the previous ones")]
    DegenerateBasis { column: usize },

    #[error("Gram matrix is not positive definite even after jitter {max_jitter:e}")]
    SingularGram { max_jitter: f64 },

    #[error("non-finite value produced by {context}")]
    NonFinite { context: String },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("did not converge: {0}")]
    Convergence(String),

    #[error("training step {step}: {source}")]
    AtStep { step: usize, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numeric(&self) -> bool {
        if let Error::AtStep { source, .. } = self {
            return source.is_numeric();
        }
        matches!(
            self,
            Error::DegenerateBasis { .. }
                | Error::SingularGram { .. }
                | Error::NonFinite { .. }
                | Error::Convergence(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
