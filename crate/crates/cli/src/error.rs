use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(qst_core::Error),
}

impl From<qst_core::Error> for HarnessError {
    fn from(e: qst_core::Error) -> Self {
        match e {
            qst_core::Error::Source(msg) => HarnessError::Protocol(msg),
            qst_core::Error::InvalidConfig(msg) => HarnessError::Config(msg),
            other => HarnessError::Core(other),
        }
    }
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 3 for protocol
    /// violations, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Protocol(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
