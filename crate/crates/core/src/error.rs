use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("insufficient pre-history: need {needed} samples before t = 0, got {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("numerical failure: {message} (jitter tried up to {max_jitter:.3e})")]
    Numerical { message: String, max_jitter: f64 },

    #[error("hyperparameter tuning failed: {0}")]
    Tuning(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error once all context layers are stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures that come from the data or config rather than arithmetic.
    pub fn is_validation(&self) -> bool {
        matches!(
            self.root(),
            Error::InvalidSpec(_)
                | Error::InvalidHyperparameter(_)
                | Error::DimensionMismatch(_)
                | Error::Resource(_)
                | Error::Precondition(_)
                | Error::InsufficientHistory { .. }
                | Error::Json(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
