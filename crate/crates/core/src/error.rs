use std::fmt;

/// Sampled values of the quantization function recorded when a root search
/// does not behave as the analytic brackets predict.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanTrace {
    pub level: usize,
    pub bracket: (f64, f64),
    pub samples: Vec<(f64, f64)>,
}

impl fmt::Display for ScanTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "level {} bracket [{:.6e}, {:.6e}] with {} samples",
            self.level,
            self.bracket.0,
            self.bracket.1,
            self.samples.len()
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver failure: {message} ({trace})")]
    SolverFailure { message: String, trace: ScanTrace },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("ambiguous holonomy: {0}")]
    Ambiguous(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("integration failure at cycle parameter {at:.9}: {message}")]
    Integration { at: f64, message: String },

    #[error("unresolved crossing at cycle parameter {at:.9}: {message}")]
    Unresolved { at: f64, message: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, with context layers stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
