use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("corpus too small: {0}")]
    Sizing(String),

    #[error("span {start}..{end} in document {doc_id} does not align with token boundaries")]
    Alignment {
        doc_id: String,
        start: usize,
        end: usize,
    },

    #[error("decode error: {0}")]
    Decode(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("transfer error: {0}")]
    Transfer(String),

    #[error("gradient check failed: {0}")]
    GradientCheck(String),

    #[error("inconsistent counts: {0}")]
    Consistency(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("separation or non-convergence after {iterations} iterations: {message}")]
    Separation { iterations: usize, message: String },

    #[error("imputation error: {0}")]
    Imputation(String),

    #[error("donor pool has {available} donors, need {required}")]
    DonorPool { available: usize, required: usize },

    #[error("pooling error: {0}")]
    Pooling(String),

    #[error("numerical error: {0}")]
    Numeric(String),

    #[error("{context}: {source}")]
    Stage {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Wraps the error with a description of where it happened.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Stage {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error after unwrapping stage context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(
            self.root(),
            Error::Separation { .. } | Error::Numeric(_) | Error::GradientCheck(_)
        )
    }

    pub fn is_validation(&self) -> bool {
        matches!(
            self.root(),
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::Config(_)
                | Error::Sizing(_)
                | Error::Alignment { .. }
                | Error::Decode(_)
                | Error::Transfer(_)
                | Error::Consistency(_)
                | Error::Input(_)
                | Error::Encoding(_)
                | Error::Precondition(_)
                | Error::Imputation(_)
                | Error::DonorPool { .. }
                | Error::Pooling(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
