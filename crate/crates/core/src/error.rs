use thiserror::Error;

/// Errors produced by the numerical layers, selectors and data ingestion.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative or truncated computation ran out of budget before
    /// reaching the requested accuracy.
    #[error("tolerance not met in {what}: best estimate {estimate}, error estimate {error}")]
    ToleranceNotMet {
        what: &'static str,
        estimate: f64,
        error: f64,
    },

    /// A bracketing root finder was given an interval without a sign change.
    #[error("root not bracketed: g(lo) = {g_lo}, g(hi) = {g_hi}")]
    NoBracket { g_lo: f64, g_hi: f64 },

    /// The requested (kernel, order) combination has no known constants.
    #[error("unsupported: {0}")]
    Capability(String),

    /// Every restart of a mixture fit degenerated.
    #[error("mixture fit failed: {0}")]
    FitFailed(String),

    /// Input parse failure; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::ToleranceNotMet { .. } => "tolerance_not_met",
            Error::NoBracket { .. } => "no_bracket",
            Error::Capability(_) => "capability",
            Error::FitFailed(_) => "fit_failed",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
