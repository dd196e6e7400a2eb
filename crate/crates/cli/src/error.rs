use cvm_core::CvmError;
use cvm_survey::SurveyError;
use thiserror::Error;

pub const EXIT_FAILURE: u8 = 1;
/// Input could not be read or parsed.
pub const EXIT_PARSE: u8 = 2;
pub const EXIT_CONVERGENCE: u8 = 3;
pub const EXIT_FLAGS: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Flags(String),
    #[error("cannot read {path}: {source}")]
    Input { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] CvmError),
    #[error(transparent)]
    Survey(#[from] SurveyError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Flags(_) => EXIT_FLAGS,
            CliError::Input { .. } => EXIT_PARSE,
            CliError::Output { .. } => EXIT_FAILURE,
            CliError::Core(e) => core_code(e),
            CliError::Survey(SurveyError::Definition(_)) => EXIT_PARSE,
            CliError::Survey(SurveyError::Core(e)) => core_code(e),
            CliError::Survey(_) => EXIT_FAILURE,
        }
    }
}

fn core_code(e: &CvmError) -> u8 {
    match e {
        CvmError::Parse { .. } => EXIT_PARSE,
        CvmError::Convergence { .. } => EXIT_CONVERGENCE,
        _ => EXIT_FAILURE,
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_code_mapping() {
        let convergence = CvmError::Convergence {
            iterations: 200,
            grad_norm: 1.0,
            trace: Vec::new(),
        };
        assert_eq!(CliError::Core(convergence).exit_code(), EXIT_CONVERGENCE);
        let parse = CvmError::Parse {
            line: 3,
            column: None,
            message: "bad".into(),
        };
        assert_eq!(CliError::Core(parse).exit_code(), EXIT_PARSE);
        assert_eq!(CliError::Flags("x".into()).exit_code(), EXIT_FLAGS);
        assert_eq!(CliError::Core(CvmError::EmptyData).exit_code(), EXIT_FAILURE);
        assert_eq!(
            CliError::Survey(SurveyError::Definition("bad".into())).exit_code(),
            EXIT_PARSE
        );
    }
}
