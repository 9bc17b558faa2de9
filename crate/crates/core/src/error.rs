use thiserror::Error;

/// Errors raised by the label models and their file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("index out of range: {what} {index} (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("every rule abstains on every point")]
    NoInformativeRules,

    #[error("boundary parameter: {0}")]
    BoundaryParameter(String),

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error("decomposition identity violated: {0}")]
    Decomposition(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Short stable identifier, used by the CLI's one-line error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::InvalidInput(_) => "invalid_input",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::NoInformativeRules => "no_informative_rules",
            Error::BoundaryParameter(_) => "boundary_parameter",
            Error::NotConverged(_) => "not_converged",
            Error::Decomposition(_) => "decomposition",
            Error::Parse { .. } => "parse",
            Error::Io(_) | Error::File { .. } => "io",
            Error::Serialization(_) => "serialization",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
