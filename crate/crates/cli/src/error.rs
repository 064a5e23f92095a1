use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum LabError {
    /// Unreadable or malformed config, unknown recipe or bad parameters.
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime failure: {0}")]
    Runtime(#[from] passn_core::Error),
    /// A report that does not match its checked-in output schema.
    #[error("report schema violation: {0}")]
    Schema(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => EXIT_CONFIG,
            LabError::Runtime(_) | LabError::Schema(_) | LabError::Io(_) => EXIT_RUNTIME,
        }
    }
}

pub type LabResult<T> = std::result::Result<T, LabError>;

pub(crate) fn config(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}
