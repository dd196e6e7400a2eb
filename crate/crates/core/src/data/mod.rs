//! Survey data ingestion and preparation for estimation.

pub mod aggregate;
pub mod design;
pub mod protest;
pub mod records;

use std::io::BufRead;
use std::path::Path;

use crate::error::{CvmError, Result};
use crate::estimation::ModelSpec;
use crate::model::{outcome_to_interval, Observation};
use crate::scalar::Scalar;

pub use aggregate::{
    aggregate_responses, expand_cells, load_aggregate, read_aggregate, table3_fixture, write_aggregate, AggregateCell,
    Response, TABLE3_CSV,
};
pub use design::{design_bids, read_design, read_pilot, BidDesign};
pub use protest::{apply_protest_policy, ProtestAudit, ProtestPolicy};
pub use records::{
    load_respondents, read_respondents, write_respondents, RespondentRecord, RespondentSchema, ZeroReason,
};

/// A parsed input file of either layout.
#[derive(Debug, Clone, PartialEq)]
pub enum SurveyInput {
    Respondents(Vec<RespondentRecord>),
    Aggregate(Vec<AggregateCell>),
}

/// Loads a respondent or aggregate CSV, telling them apart by header.
pub fn load_input(path: impl AsRef<Path>) -> Result<SurveyInput> {
    let path = path.as_ref();
    let mut first = String::new();
    std::io::BufReader::new(std::fs::File::open(path)?).read_line(&mut first)?;
    let header: Vec<&str> = first.trim().split(',').map(str::trim).collect();
    if header == aggregate::AGGREGATE_HEADER {
        Ok(SurveyInput::Aggregate(load_aggregate(path)?))
    } else if header.first() == Some(&"id") {
        Ok(SurveyInput::Respondents(load_respondents(
            path,
            &RespondentSchema::default(),
        )?))
    } else {
        Err(CvmError::parse(
            1,
            None,
            "unrecognized header: expected a respondent or aggregate CSV",
        ))
    }
}

/// Likelihood-ready observations from respondent records, after applying
/// the model's protest policy. Covariates are taken in `spec` order.
pub fn records_to_observations<T: Scalar>(
    records: &[RespondentRecord],
    spec: &ModelSpec,
) -> Result<(Vec<Observation<T>>, ProtestAudit)> {
    let policy = if spec.include_protest_as_zero {
        ProtestPolicy::IncludeAsZero
    } else {
        ProtestPolicy::Exclude
    };
    let (kept, audit) = apply_protest_policy(records.to_vec(), policy);
    let obs = kept
        .iter()
        .map(|r| {
            let censor = outcome_to_interval(r.arm, r.bids, r.outcome)?;
            let covariates =
                spec.covariate_names
                    .iter()
                    .map(|n| {
                        r.covariates.get(n).map(|&v| T::lit(v)).ok_or_else(|| {
                            CvmError::InvalidArgument(format!("record `{}` has no covariate `{n}`", r.id))
                        })
                    })
                    .collect::<Result<Vec<T>>>()?;
            Ok(Observation::new(censor, covariates))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((obs, audit))
}

/// Weighted observations from aggregate cells. Cells carry neither covariates
/// nor protest status, so specs needing either are rejected.
pub fn cells_to_observations<T: Scalar>(cells: &[AggregateCell], spec: &ModelSpec) -> Result<Vec<Observation<T>>> {
    if !spec.covariate_names.is_empty() {
        return Err(CvmError::InvalidArgument(
            "aggregate data carries no covariates; use respondent-level input for a covariate model".into(),
        ));
    }
    if !spec.include_protest_as_zero {
        return Err(CvmError::InvalidArgument(
            "aggregate data carries no protest status; protest exclusion needs respondent-level input".into(),
        ));
    }
    cells
        .iter()
        .map(|c| {
            let censor = outcome_to_interval(c.arm, c.bids, c.outcome)?.with_weight(c.count)?;
            Ok(Observation::plain(censor))
        })
        .collect()
}

/// Merges identical observations into one, summing weights. First-seen
/// order is kept.
pub fn compress_observations<T: Scalar>(data: &[Observation<T>]) -> Vec<Observation<T>> {
    let mut out: Vec<Observation<T>> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for o in data {
        let key = observation_key(o);
        match index.get(&key) {
            Some(&i) => {
                let merged: &mut Observation<T> = &mut out[i];
                let w = merged.censor.weight() + o.censor.weight();
                merged.censor = merged.censor.with_weight(w).expect("positive weight");
            }
            None => {
                index.insert(key, out.len());
                out.push(o.clone());
            }
        }
    }
    out
}

fn observation_key<T: Scalar>(o: &Observation<T>) -> Vec<u64> {
    use crate::model::CensorKind;
    let bits = |x: T| x.to_f64_lossy().to_bits();
    let mut key = match o.censor.kind() {
        CensorKind::PointZero => vec![0],
        CensorKind::Between { lo, hi } => vec![1, bits(lo), bits(hi)],
        CensorKind::Above { lo } => vec![2, bits(lo)],
    };
    key.extend(o.covariates.iter().map(|&x| bits(x)));
    key
}
