use thiserror::Error;

/// Errors raised by model construction, enumeration and the experiment runners.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid group model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("word is not freely reduced: {0}")]
    NotReduced(String),

    #[error("not a partition of the boundary: {0}")]
    NotAPartition(String),

    #[error("enumeration cap exceeded while {what}: more than {cap} elements")]
    CapExceeded { what: String, cap: usize },

    #[error("empty U-set for pair ({g}, {h}); tau' = {tau_prime} is too small")]
    EmptyUSet {
        g: String,
        h: String,
        tau_prime: f64,
    },

    #[error("covering not attainable: {0}")]
    CoverFailed(String),

    #[error("kernel has unbounded support: {0}")]
    UnboundedSupport(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
