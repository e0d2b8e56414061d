use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdmError {
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid parameter `{name}`: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate update at step {step}: all weighted likelihoods vanished")]
    DegenerateUpdate { step: usize },

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("{0} out of range")]
    OutOfRange(String),

    #[error("load error: {0}")]
    Load(String),

    #[error("io error: {0}")]
    Io(String),
}

impl SdmError {
    pub(crate) fn length_mismatch(what: &str, left: usize, right: usize) -> Self {
        SdmError::InvalidArgument(format!("{what}: length mismatch ({left} vs {right})"))
    }

    /// Attach a step index to errors raised inside a filter step.
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            SdmError::DegenerateUpdate { .. } => SdmError::DegenerateUpdate { step },
            other => other,
        }
    }
}

impl From<std::io::Error> for SdmError {
    fn from(err: std::io::Error) -> Self {
        SdmError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SdmError>;
