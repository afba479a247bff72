use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid choice system: {0}")]
    InvalidSystem(String),
    #[error("invalid pair: {0}")]
    InvalidPair(String),
    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid linear order: {0}")]
    InvalidOrder(String),
    #[error("{n} alternatives exceeds the limit of {limit} for {what}")]
    TooManyAlternatives { what: &'static str, n: usize, limit: usize },
    #[error("linear program did not converge: {0}")]
    LpNotConverged(String),
    #[error("invalid Bayes factor configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid gamble: {0}")]
    InvalidGamble(String),
    #[error("invalid trial schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid responder {id:?}: {reason}")]
    InvalidResponder { id: String, reason: String },
    #[error("unsupported operation for responder {id:?}: {reason}")]
    UnsupportedResponder { id: String, reason: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed {what}: {reason}")]
    Format { what: String, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }

    pub(crate) fn format(what: impl Into<String>, reason: impl ToString) -> Self {
        Error::Format { what: what.into(), reason: reason.to_string() }
    }

    /// True for errors caused by user input rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Transport(_) | Error::LpNotConverged(_))
    }
}
