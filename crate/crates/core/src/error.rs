use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent sizes, out-of-range parameters and similar setup mistakes.
    #[error("configuration error: {0}")]
    Config(String),

    /// Valid configuration that the requested operation cannot handle
    /// (odd chromosome length for the Nash chromosome, ...).
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// The market parameters do not admit the requested solution.
    #[error("model parameter error: {0}")]
    Model(String),

    /// Statistics requested on data that cannot support them.
    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("I/O error at generation {generation}: {source}")]
    Sink {
        generation: u64,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
