//! Respondent-level CSV: `id,arm,lower_bid,upper_bid,outcome,[covariates…],zero_reason`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CvmError, Result};
use crate::model::{Arm, BidPair, Outcome};

const LEADING: [&str; 5] = ["id", "arm", "lower_bid", "upper_bid", "outcome"];
const TRAILING: &str = "zero_reason";

/// Stated reason behind a zero response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroReason {
    CannotAfford,
    ExistingTax,
    NotEnoughInfo,
    NotPriority,
    NotInterested,
    Other,
}

impl ZeroReason {
    pub const ALL: [ZeroReason; 6] = [
        ZeroReason::CannotAfford,
        ZeroReason::ExistingTax,
        ZeroReason::NotEnoughInfo,
        ZeroReason::NotPriority,
        ZeroReason::NotInterested,
        ZeroReason::Other,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ZeroReason::CannotAfford => "cannot_afford",
            ZeroReason::ExistingTax => "existing_tax",
            ZeroReason::NotEnoughInfo => "not_enough_info",
            ZeroReason::NotPriority => "not_priority",
            ZeroReason::NotInterested => "not_interested",
            ZeroReason::Other => "other",
        }
    }

    /// Protest zeros object to the instrument rather than the good.
    pub fn is_protest(self) -> bool {
        self == ZeroReason::NotEnoughInfo
    }
}

impl fmt::Display for ZeroReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ZeroReason {
    type Err = CvmError;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        ZeroReason::ALL
            .into_iter()
            .find(|r| r.code() == s)
            .ok_or_else(|| CvmError::InvalidArgument(format!("unknown zero reason `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RespondentRecord {
    pub id: String,
    pub arm: Arm,
    pub bids: BidPair,
    pub outcome: Outcome,
    pub covariates: BTreeMap<String, f64>,
    pub zero_reason: Option<ZeroReason>,
}

impl RespondentRecord {
    pub fn new(
        id: impl Into<String>,
        arm: Arm,
        bids: BidPair,
        outcome: Outcome,
        covariates: BTreeMap<String, f64>,
        zero_reason: Option<ZeroReason>,
    ) -> Result<Self> {
        let r = RespondentRecord {
            id: id.into(),
            arm,
            bids,
            outcome,
            covariates,
            zero_reason,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(CvmError::InvalidArgument("respondent id is empty".into()));
        }
        if self.outcome.arm() != self.arm {
            return Err(CvmError::InvalidArgument(format!(
                "outcome {} does not belong to the {}-first arm",
                self.outcome, self.arm
            )));
        }
        match (self.outcome.is_zero(), self.zero_reason) {
            (true, None) => Err(CvmError::InvalidArgument(format!(
                "zero outcome {} needs a zero_reason",
                self.outcome
            ))),
            (false, Some(r)) => Err(CvmError::InvalidArgument(format!(
                "zero_reason `{r}` given for non-zero outcome {}",
                self.outcome
            ))),
            _ => {
                if let Some((k, _)) = self.covariates.iter().find(|(_, v)| !v.is_finite()) {
                    return Err(CvmError::InvalidArgument(format!("covariate `{k}` is not finite")));
                }
                Ok(())
            }
        }
    }

    pub fn is_protest(&self) -> bool {
        self.zero_reason.is_some_and(ZeroReason::is_protest)
    }
}

/// Columns the respondent file must carry beyond the fixed ones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RespondentSchema {
    /// Required covariate columns; `None` accepts whatever the header lists.
    pub covariates: Option<Vec<String>>,
}

impl RespondentSchema {
    pub fn requiring<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        RespondentSchema {
            covariates: Some(names.into_iter().map(Into::into).collect()),
        }
    }
}

pub fn load_respondents(path: impl AsRef<Path>, schema: &RespondentSchema) -> Result<Vec<RespondentRecord>> {
    read_respondents(std::fs::File::open(path)?, schema)
}

pub fn read_respondents<R: Read>(reader: R, schema: &RespondentSchema) -> Result<Vec<RespondentRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CvmError::parse(1, None, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.len() < LEADING.len() + 1
        || header[..LEADING.len()] != LEADING
        || header.last().map(String::as_str) != Some(TRAILING)
    {
        return Err(CvmError::parse(
            1,
            None,
            "header must be id,arm,lower_bid,upper_bid,outcome,[covariates…],zero_reason",
        ));
    }
    let cov_names = &header[LEADING.len()..header.len() - 1];
    if let Some(required) = &schema.covariates {
        if let Some(missing) = required.iter().find(|n| !cov_names.contains(n)) {
            return Err(CvmError::parse(
                1,
                Some(missing),
                "required covariate column is missing",
            ));
        }
    }

    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            CvmError::parse(line, None, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| row.get(i).unwrap_or("");
        let col_err = |i: usize, msg: String| CvmError::parse(line, Some(&header[i]), msg);

        let arm: Arm = field(1).parse().map_err(|e: CvmError| col_err(1, e.to_string()))?;
        let lower: u32 = field(2)
            .parse()
            .map_err(|_| col_err(2, format!("`{}` is not a whole KRW amount", field(2))))?;
        let upper: u32 = field(3)
            .parse()
            .map_err(|_| col_err(3, format!("`{}` is not a whole KRW amount", field(3))))?;
        let bids = BidPair::new(lower, upper).map_err(|e| col_err(3, e.to_string()))?;
        let outcome: Outcome = field(4).parse().map_err(|e: CvmError| col_err(4, e.to_string()))?;

        let mut covariates = BTreeMap::new();
        for (j, name) in cov_names.iter().enumerate() {
            let i = LEADING.len() + j;
            let v: f64 = field(i)
                .parse()
                .map_err(|_| col_err(i, format!("`{}` is not a number", field(i))))?;
            covariates.insert(name.clone(), v);
        }
        let zi = header.len() - 1;
        let zero_reason = match field(zi) {
            "" => None,
            s => Some(s.parse().map_err(|e: CvmError| col_err(zi, e.to_string()))?),
        };
        let rec = RespondentRecord {
            id: field(0).to_owned(),
            arm,
            bids,
            outcome,
            covariates,
            zero_reason,
        };
        rec.validate().map_err(|e| {
            let col = if e.to_string().contains("zero_reason") { zi } else { 4 };
            col_err(col, e.to_string())
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Writes records with the covariate columns in the given order.
pub fn write_respondents<W: Write>(
    writer: W,
    records: &[RespondentRecord],
    covariate_columns: &[String],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = LEADING.to_vec();
    header.extend(covariate_columns.iter().map(String::as_str));
    header.push(TRAILING);
    w.write_record(&header).map_err(csv_io)?;
    for r in records {
        let mut row = vec![
            r.id.clone(),
            r.arm.code().to_owned(),
            r.bids.lower().to_string(),
            r.bids.upper().to_string(),
            r.outcome.code().to_owned(),
        ];
        for c in covariate_columns {
            let v = r
                .covariates
                .get(c)
                .ok_or_else(|| CvmError::InvalidArgument(format!("record `{}` lacks covariate `{c}`", r.id)))?;
            row.push(v.to_string());
        }
        row.push(r.zero_reason.map(|z| z.code().to_owned()).unwrap_or_default());
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_io(e: csv::Error) -> CvmError {
    CvmError::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "id,arm,lower_bid,upper_bid,outcome,age,zero_reason\n";

    #[test]
    fn parses_zero_row_with_reason() {
        let csv = format!("{HEADER}r1,upper,1000,2000,U_NNN,3,existing_tax\n");
        let recs = read_respondents(csv.as_bytes(), &RespondentSchema::default()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].outcome, Outcome::UNNN);
        assert_eq!(recs[0].zero_reason, Some(ZeroReason::ExistingTax));
        assert!(!recs[0].is_protest());
        assert_eq!(recs[0].covariates["age"], 3.0);
    }

    #[test]
    fn arm_outcome_mismatch_reports_location() {
        let csv = format!("{HEADER}r1,upper,1000,2000,U_Y,3,\nr2,lower,1000,2000,U_Y,3,\n");
        let err = read_respondents(csv.as_bytes(), &RespondentSchema::default()).unwrap_err();
        match err {
            CvmError::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column.as_deref(), Some("outcome"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_zero_reason_is_rejected() {
        let csv = format!("{HEADER}r1,lower,1000,2000,L_NN,3,\n");
        let err = read_respondents(csv.as_bytes(), &RespondentSchema::default()).unwrap_err();
        assert!(matches!(err, CvmError::Parse { ref column, .. } if column.as_deref() == Some("zero_reason")));
    }

    #[test]
    fn unknown_outcome_code_is_rejected() {
        let csv = format!("{HEADER}r1,lower,1000,2000,L_MAYBE,3,\n");
        assert!(read_respondents(csv.as_bytes(), &RespondentSchema::default()).is_err());
    }

    #[test]
    fn schema_requires_columns() {
        let csv = format!("{HEADER}r1,upper,1000,2000,U_Y,3,\n");
        let schema = RespondentSchema::requiring(["income"]);
        assert!(matches!(
            read_respondents(csv.as_bytes(), &schema),
            Err(CvmError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn write_then_read_preserves_records() {
        let csv = format!("{HEADER}a,upper,1000,2000,U_NY,2.5,\nb,lower,3000,4000,L_NN,4,not_enough_info\n");
        let recs = read_respondents(csv.as_bytes(), &RespondentSchema::default()).unwrap();
        let mut buf = Vec::new();
        write_respondents(&mut buf, &recs, &["age".to_owned()]).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap().lines().next().unwrap(),
            HEADER.trim_end()
        );
        let again = read_respondents(buf.as_slice(), &RespondentSchema::default()).unwrap();
        assert_eq!(recs, again);
        assert!(again[1].is_protest());
    }
}
