use serde::{Deserialize, Serialize};

use crate::data::records::RespondentRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtestPolicy {
    /// Keep protest zeros as true zeros.
    IncludeAsZero,
    Exclude,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ProtestAudit {
    pub total: usize,
    pub zero_responses: usize,
    pub protest: usize,
    pub removed: usize,
}

pub fn apply_protest_policy(
    records: Vec<RespondentRecord>,
    policy: ProtestPolicy,
) -> (Vec<RespondentRecord>, ProtestAudit) {
    let mut audit = ProtestAudit {
        total: records.len(),
        zero_responses: records.iter().filter(|r| r.outcome.is_zero()).count(),
        protest: records.iter().filter(|r| r.is_protest()).count(),
        removed: 0,
    };
    let kept: Vec<RespondentRecord> = match policy {
        ProtestPolicy::IncludeAsZero => records,
        ProtestPolicy::Exclude => records.into_iter().filter(|r| !r.is_protest()).collect(),
    };
    audit.removed = audit.total - kept.len();
    (kept, audit)
}
