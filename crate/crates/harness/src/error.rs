use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] pclm_core::Error),
    #[error("config: {0}")]
    Config(String),
    /// parameter conditions that failed before the run
    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("insufficient data: need {needed} points, found {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Process exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Validation(_) => 2,
            HarnessError::Core(pclm_core::Error::Configuration(_)) => 2,
            HarnessError::Core(pclm_core::Error::Parse(_)) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
