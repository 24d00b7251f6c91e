use thiserror::Error;

/// Errors raised across the library.
///
/// The variants are grouped so that front ends can map them onto a small
/// set of exit codes: configuration/validation problems, numerical
/// failures, and missing or unreadable inputs.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An input object failed validation (e.g. a density that does not
    /// integrate to one).
    #[error("validation error: {0}")]
    Validation(String),

    /// A documented precondition of the operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Non-finite values appeared during time stepping.
    #[error("numerical blow-up at step {step}: {detail}")]
    BlowUp { step: u64, detail: String },

    /// The relaxation-time integral never reached the noise band.
    #[error("integration incomplete: autocorrelation never entered the zero band (partial tau = {partial})")]
    IntegrationIncomplete { partial: f64 },

    /// No lag carried enough signal to fit a smoothness parameter.
    #[error("fit undefined: {0}")]
    FitUndefined(String),

    /// Malformed text input, with a 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
