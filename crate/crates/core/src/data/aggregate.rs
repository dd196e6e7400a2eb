//! Aggregate response counts: `arm,lower_bid,upper_bid,outcome,count`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::records::csv_io;
use crate::error::{CvmError, Result};
use crate::model::{Arm, BidPair, Outcome};

pub const AGGREGATE_HEADER: [&str; 5] = ["arm", "lower_bid", "upper_bid", "outcome", "count"];

/// The response distribution of the 1,040-respondent UFP survey.
pub const TABLE3_CSV: &str = include_str!("../../fixtures/table3.csv");

/// One design cell × outcome, as the key of an aggregate count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Response {
    pub arm: Arm,
    pub bids: BidPair,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateCell {
    pub arm: Arm,
    pub bids: BidPair,
    pub outcome: Outcome,
    pub count: u32,
}

impl AggregateCell {
    pub fn new(arm: Arm, bids: BidPair, outcome: Outcome, count: u32) -> Result<Self> {
        if count == 0 {
            return Err(CvmError::InvalidArgument("cell count must be at least 1".into()));
        }
        if outcome.arm() != arm {
            return Err(CvmError::InvalidArgument(format!(
                "outcome {outcome} does not belong to the {arm}-first arm"
            )));
        }
        Ok(AggregateCell {
            arm,
            bids,
            outcome,
            count,
        })
    }

    pub fn response(&self) -> Response {
        Response {
            arm: self.arm,
            bids: self.bids,
            outcome: self.outcome,
        }
    }
}

pub fn load_aggregate(path: impl AsRef<Path>) -> Result<Vec<AggregateCell>> {
    read_aggregate(std::fs::File::open(path)?)
}

pub fn read_aggregate<R: Read>(reader: R) -> Result<Vec<AggregateCell>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| CvmError::parse(1, None, e.to_string()))?
        .clone();
    if header.iter().ne(AGGREGATE_HEADER) {
        return Err(CvmError::parse(
            1,
            None,
            "header must be arm,lower_bid,upper_bid,outcome,count",
        ));
    }
    let mut cells = Vec::new();
    let mut seen: BTreeMap<Response, usize> = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            CvmError::parse(line, None, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let col = |i: usize, msg: String| CvmError::parse(line, Some(AGGREGATE_HEADER[i]), msg);
        let f = |i: usize| row.get(i).unwrap_or("");
        let arm: Arm = f(0).parse().map_err(|e: CvmError| col(0, e.to_string()))?;
        let lower: u32 = f(1).parse().map_err(|_| col(1, format!("bad amount `{}`", f(1))))?;
        let upper: u32 = f(2).parse().map_err(|_| col(2, format!("bad amount `{}`", f(2))))?;
        let bids = BidPair::new(lower, upper).map_err(|e| col(2, e.to_string()))?;
        let outcome: Outcome = f(3).parse().map_err(|e: CvmError| col(3, e.to_string()))?;
        let count: u32 = f(4).parse().map_err(|_| col(4, format!("bad count `{}`", f(4))))?;
        let cell = AggregateCell::new(arm, bids, outcome, count).map_err(|e| col(3, e.to_string()))?;
        if let Some(first) = seen.insert(cell.response(), line) {
            return Err(CvmError::parse(
                line,
                None,
                format!("duplicate cell ({arm}, {lower}, {upper}, {outcome}); first seen on line {first}"),
            ));
        }
        cells.push(cell);
    }
    if cells.is_empty() {
        return Err(CvmError::EmptyData);
    }
    Ok(cells)
}

pub fn write_aggregate<W: Write>(writer: W, cells: &[AggregateCell]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(AGGREGATE_HEADER).map_err(csv_io)?;
    for c in cells {
        w.write_record([
            c.arm.code(),
            &c.bids.lower().to_string(),
            &c.bids.upper().to_string(),
            c.outcome.code(),
            &c.count.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// The bundled survey distribution.
pub fn table3_fixture() -> Vec<AggregateCell> {
    read_aggregate(TABLE3_CSV.as_bytes()).expect("bundled fixture is valid")
}

/// One `Response` per counted respondent.
pub fn expand_cells(cells: &[AggregateCell]) -> Vec<Response> {
    cells
        .iter()
        .flat_map(|c| std::iter::repeat_n(c.response(), c.count as usize))
        .collect()
}

/// Counts responses into cells, ordered by (arm, bids, outcome).
pub fn aggregate_responses(responses: impl IntoIterator<Item = Response>) -> Vec<AggregateCell> {
    let mut counts: BTreeMap<Response, u32> = BTreeMap::new();
    for r in responses {
        *counts.entry(r).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(r, count)| AggregateCell {
            arm: r.arm,
            bids: r.bids,
            outcome: r.outcome,
            count,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_totals() {
        let cells = table3_fixture();
        assert_eq!(cells.len(), 80);
        let total: u32 = cells.iter().map(|c| c.count).sum();
        assert_eq!(total, 1040);
        let zeros: u32 = cells.iter().filter(|c| c.outcome.is_zero()).map(|c| c.count).sum();
        assert_eq!(zeros, 249);
        let upper_yes: u32 = cells.iter().filter(|c| c.outcome == Outcome::UY).map(|c| c.count).sum();
        assert_eq!(upper_yes, 203);
    }

    #[test]
    fn fixture_first_cell() {
        let cells = table3_fixture();
        let pair = BidPair::new(1000, 2000).unwrap();
        let get = |o| cells.iter().find(|c| c.bids == pair && c.outcome == o).unwrap().count;
        assert_eq!(
            [
                get(Outcome::UY),
                get(Outcome::UNY),
                get(Outcome::UNNY),
                get(Outcome::UNNN)
            ],
            [27, 8, 3, 15]
        );
    }

    #[test]
    fn duplicate_keys_rejected() {
        let csv = "arm,lower_bid,upper_bid,outcome,count\nupper,1000,2000,U_Y,3\nupper,1000,2000,U_Y,4\n";
        assert!(matches!(
            read_aggregate(csv.as_bytes()),
            Err(CvmError::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn empty_file_rejected() {
        assert!(read_aggregate("".as_bytes()).is_err());
        assert!(matches!(
            read_aggregate("arm,lower_bid,upper_bid,outcome,count\n".as_bytes()),
            Err(CvmError::EmptyData)
        ));
    }

    #[test]
    fn zero_count_and_mismatch_rejected() {
        let zero = "arm,lower_bid,upper_bid,outcome,count\nupper,1000,2000,U_Y,0\n";
        assert!(read_aggregate(zero.as_bytes()).is_err());
        let mismatch = "arm,lower_bid,upper_bid,outcome,count\nlower,1000,2000,U_Y,2\n";
        assert!(read_aggregate(mismatch.as_bytes()).is_err());
    }
}
