use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("invalid {field}: {message}")]
    InvalidConfig { field: &'static str, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{method} requires {requirement}")]
    Unsupported {
        method: &'static str,
        requirement: String,
    },

    #[error("cache classes required")]
    MissingClasses,

    #[error("structural violation: {0}")]
    Structure(String),

    #[error("enumeration of {requested} items exceeds the cap of {cap} (set CACHECRAFT_ENUM_CAP to override)")]
    EnumerationCap { requested: u128, cap: u64 },

    #[error("numeric instability: {0}")]
    Numeric(String),

    #[error("LP iteration limit of {0} reached")]
    IterationLimit(usize),

    #[error("LP backend failure: {0}")]
    Backend(String),

    #[error("LP {status}: {context}")]
    NotOptimal { status: String, context: String },

    #[error("invalid argument: {0}")]
    Argument(String),
}

impl Error {
    pub(crate) fn config(field: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            message: message.into(),
        }
    }

    /// Short machine-readable discriminant, used in CLI error documents.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse(_) => "parse",
            Error::InvalidConfig { .. } => "invalid_config",
            Error::Dimension(_) => "dimension",
            Error::Unsupported { .. } => "unsupported",
            Error::MissingClasses => "missing_classes",
            Error::Structure(_) => "structure",
            Error::EnumerationCap { .. } => "enumeration_cap",
            Error::Numeric(_) => "numeric",
            Error::IterationLimit(_) => "iteration_limit",
            Error::Backend(_) => "backend",
            Error::NotOptimal { .. } => "not_optimal",
            Error::Argument(_) => "argument",
        }
    }
}
