use sdm_core::SdmError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] SdmError),
}

impl CliError {
    /// 1 usage/config, 2 data, 3 numerical degeneracy.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e {
                SdmError::InvalidConfiguration(_) | SdmError::InvalidParameter { .. } => 1,
                SdmError::DegenerateUpdate { .. } | SdmError::DegenerateSeries(_) => 3,
                SdmError::InvalidArgument(_)
                | SdmError::OutOfRange(_)
                | SdmError::Load(_)
                | SdmError::Io(_) => 2,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            1 => "config",
            2 => "data",
            _ => "numerical",
        }
    }
}
