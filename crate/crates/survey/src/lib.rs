//! Survey administration for one-and-one-half-bounded dichotomous-choice
//! questionnaires: server-enforced branching, seeded assignment, and an
//! append-only response log that exports to the estimator's respondent CSV.

pub mod definition;
pub mod error;
pub mod flow;
pub mod http;
pub mod service;
pub mod store;

pub use definition::SurveyDefinition;
pub use error::{Result, SurveyError};
pub use flow::{Answer, Phase, Question, SessionState};
pub use service::{AnswerReceipt, QuestionPayload, ServiceConfig, Submission, SurveyService};
pub use store::{export_responses, read_store, ResponseStore, StoredResponse};
