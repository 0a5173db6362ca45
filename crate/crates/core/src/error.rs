use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied inconsistent shapes, ranks, modes or configuration.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A file did not follow its binary layout.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }
}
