use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of the function it was passed to.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid scenario parameters: {0}")]
    InvalidParams(String),

    /// A closed form that diverges for the supplied inputs (e.g. lossless delivery is impossible).
    #[error("singular input: {0}")]
    Singular(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("frame codec: {0}")]
    Codec(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
