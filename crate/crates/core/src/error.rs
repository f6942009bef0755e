use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("non-finite state: {0}")]
    NonFinite(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
