use thiserror::Error;

/// Errors surfaced by every layer of the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("index {index} out of range for {len} cells")]
    Index { index: usize, len: usize },

    #[error("power constraint violated by beamformer {k}: |w|^2 = {norm_sq}")]
    Constraint { k: usize, norm_sq: f64 },

    #[error("architecture mismatch: {0}")]
    Architecture(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("epoch {epoch}: {source}")]
    Epoch {
        epoch: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable category, used by the CLI on exit.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Config(_) => "config",
            Error::Dimension { .. } => "dimension",
            Error::Index { .. } => "index",
            Error::Constraint { .. } => "constraint",
            Error::Architecture(_) => "architecture",
            Error::Protocol(_) => "protocol",
            Error::Infeasible(_) => "infeasible",
            Error::Format(_) => "format",
            Error::Epoch { source, .. } => source.category(),
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
