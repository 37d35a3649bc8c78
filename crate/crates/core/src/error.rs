use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("stream of length {len} is shorter than one epoch of {epoch_len} samples")]
    StreamTooShort { len: usize, epoch_len: usize },

    #[error("channel lengths differ: channel 0 has {expected} samples, channel {channel} has {found}")]
    ChannelLengthMismatch {
        channel: usize,
        expected: usize,
        found: usize,
    },

    #[error("stream length {len} is not a multiple of the epoch length {epoch_len}")]
    TrailingSamples { len: usize, epoch_len: usize },

    #[error("non-finite sample at index {0}")]
    NonFinite(usize),

    #[error("band {0} contains no fundamental frequency")]
    EmptyBand(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("parameter {theta} is outside the domain of the {family} copula")]
    InvalidTheta { family: &'static str, theta: f64 },

    #[error("Kendall's tau {tau} is not attainable by the {family} copula")]
    TauOutOfRange { family: &'static str, tau: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
