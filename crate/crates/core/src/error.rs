use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or dimensions that cannot be combined.
    #[error("dimension mismatch: {0}")]
    Structural(String),

    /// An input violated a documented precondition (non-Hermitian operator,
    /// non-positive density matrix, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid Bloch vector: |a| = {0} exceeds 1")]
    InvalidBloch(f64),

    /// The integrator lost norm or positivity; retry with a smaller step.
    #[error("step-size error at t = {time}: {reason} (try a smaller dt)")]
    StepSize { time: f64, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),

    #[error("trajectory {id}: {source}")]
    Trajectory {
        id: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the user's configuration rather than the
    /// numerics.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Serialization(_) => true,
            Error::Trajectory { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
