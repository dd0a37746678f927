use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("fault branch solve did not converge at step {step} (t = {time:.6} s)")]
    NonConvergence { step: usize, time: f64 },

    #[error("ill-conditioned geometry matrix (condition number {condition:.3e} > {threshold:.1e}); reposition the sensor heads")]
    IllConditioned { condition: f64, threshold: f64 },

    #[error("channel `{0}` not found")]
    MissingChannel(String),

    #[error("record mismatch: {0}")]
    Mismatch(String),

    #[error("{0}")]
    Dataset(String),

    #[error("scenario {scenario}: {source}")]
    Scenario {
        scenario: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
