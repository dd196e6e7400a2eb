use thiserror::Error;

pub type Result<T> = std::result::Result<T, SurveyError>;

#[derive(Debug, Error)]
pub enum SurveyError {
    #[error("invalid survey definition: {0}")]
    Definition(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session `{0}` expired after inactivity")]
    Expired(String),
    #[error("session is complete; no more questions")]
    Done,
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("invalid answer: {0}")]
    Validation(String),
    #[error("corrupt record at byte offset {offset} (line {line}): {message}")]
    CorruptRecord { offset: u64, line: usize, message: String },
    #[error(transparent)]
    Core(#[from] cvm_core::CvmError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SurveyError {
    /// Stable machine-readable code used in HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            SurveyError::Definition(_) => "definition",
            SurveyError::UnknownSession(_) => "unknown_session",
            SurveyError::Expired(_) => "expired",
            SurveyError::Done => "done",
            SurveyError::Conflict(_) => "conflict",
            SurveyError::Validation(_) => "validation",
            SurveyError::CorruptRecord { .. } => "corrupt_record",
            SurveyError::Core(_) => "core",
            SurveyError::Io(_) => "io",
        }
    }
}
