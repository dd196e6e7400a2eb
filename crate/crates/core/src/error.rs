use thiserror::Error;

pub type Result<T> = std::result::Result<T, CvmError>;

/// One optimizer iteration, kept for convergence diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub iteration: usize,
    pub log_lik: f64,
    pub grad_norm: f64,
    pub newton_step: bool,
}

#[derive(Debug, Error)]
pub enum CvmError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty data set")]
    EmptyData,

    #[error("likelihood term is not positive for observation {index} ({observation})")]
    NumericDomain { index: usize, observation: String },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("optimizer did not converge after {iterations} iterations (|grad|_inf = {grad_norm:e})")]
    Convergence {
        iterations: usize,
        grad_norm: f64,
        trace: Vec<IterationTrace>,
    },

    #[error("singular information matrix; near-collinear columns: {}", columns.join(", "))]
    SingularHessian { columns: Vec<String> },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("parse error at line {line}{}: {message}", column.as_ref().map(|c| format!(", column `{c}`")).unwrap_or_default())]
    Parse {
        line: usize,
        column: Option<String>,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CvmError {
    pub(crate) fn parse(line: usize, column: Option<&str>, message: impl Into<String>) -> Self {
        CvmError::Parse {
            line,
            column: column.map(str::to_owned),
            message: message.into(),
        }
    }
}
