//! Append-only JSON-lines log of completed responses.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use cvm_core::data::{write_respondents, RespondentRecord};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SurveyError};

pub const STORE_FILE: &str = "responses.jsonl";

/// One completed questionnaire as persisted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredResponse {
    pub survey_id: String,
    pub record: RespondentRecord,
    /// Unix seconds.
    pub started_at: u64,
    pub completed_at: u64,
}

#[derive(Debug)]
pub struct ResponseStore {
    path: PathBuf,
    file: Mutex<File>,
}

impl ResponseStore {
    /// Opens (creating if needed) `responses.jsonl` inside `dir`.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        std::fs::create_dir_all(dir.as_ref())?;
        let path = dir.as_ref().join(STORE_FILE);
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(ResponseStore {
            path,
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends one response as a single line; concurrent callers never
    /// interleave within a line.
    pub fn append(&self, response: &StoredResponse) -> Result<()> {
        response.record.validate()?;
        let mut line = serde_json::to_vec(response).map_err(std::io::Error::other)?;
        line.push(b'\n');
        let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
        f.write_all(&line)?;
        f.sync_data()?;
        Ok(())
    }

    pub fn read_all(&self) -> Result<Vec<StoredResponse>> {
        read_store(&self.path)
    }
}

/// Parses a store file, naming the byte offset of the first bad line.
pub fn read_store(path: impl AsRef<Path>) -> Result<Vec<StoredResponse>> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    let mut offset = 0u64;
    let mut buf = String::new();
    for line in 1.. {
        buf.clear();
        let n = reader.read_line(&mut buf)?;
        if n == 0 {
            break;
        }
        let corrupt = |message: String| SurveyError::CorruptRecord { offset, line, message };
        if !buf.ends_with('\n') {
            return Err(corrupt("truncated record".into()));
        }
        let text = buf.trim_end();
        if !text.is_empty() {
            let r: StoredResponse = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
            r.record.validate().map_err(|e| corrupt(e.to_string()))?;
            out.push(r);
        }
        offset += n as u64;
    }
    Ok(out)
}

/// Writes the respondent CSV for `responses`, ordered by respondent id.
pub fn export_csv<W: Write>(writer: W, responses: &[StoredResponse], covariates: &[String]) -> Result<()> {
    let mut records: Vec<RespondentRecord> = responses.iter().map(|r| r.record.clone()).collect();
    records.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = records.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(SurveyError::Conflict(format!("respondent `{}` stored twice", w[0].id)));
    }
    write_respondents(writer, &records, covariates)?;
    Ok(())
}

pub fn export_responses(path: impl AsRef<Path>, covariates: &[String]) -> Result<String> {
    let responses = read_store(path)?;
    let mut out = Vec::new();
    export_csv(&mut out, &responses, covariates)?;
    Ok(String::from_utf8(out).expect("csv writer emits utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use cvm_core::{Arm, BidPair, Outcome};
    use std::collections::BTreeMap;

    fn response(id: &str) -> StoredResponse {
        StoredResponse {
            survey_id: "s".into(),
            record: RespondentRecord::new(
                id,
                Arm::UpperFirst,
                BidPair::new(1000, 2000).unwrap(),
                Outcome::UY,
                BTreeMap::from([("age".to_string(), 40.0)]),
                None,
            )
            .unwrap(),
            started_at: 1,
            completed_at: 2,
        }
    }

    #[test]
    fn empty_store_exports_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let store = ResponseStore::open(dir.path()).unwrap();
        let csv = export_responses(store.path(), &["age".into()]).unwrap();
        assert_eq!(csv, "id,arm,lower_bid,upper_bid,outcome,age,zero_reason\n");
    }

    #[test]
    fn export_sorts_by_id() {
        let dir = tempfile::tempdir().unwrap();
        let store = ResponseStore::open(dir.path()).unwrap();
        for id in ["b", "c", "a"] {
            store.append(&response(id)).unwrap();
        }
        let csv = export_responses(store.path(), &["age".into()]).unwrap();
        let ids: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(store.read_all().unwrap().len(), 3);
    }

    #[test]
    fn corrupt_line_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let store = ResponseStore::open(dir.path()).unwrap();
        store.append(&response("a")).unwrap();
        let good_len = std::fs::metadata(store.path()).unwrap().len();
        let mut f = OpenOptions::new().append(true).open(store.path()).unwrap();
        f.write_all(b"{not json}\n").unwrap();
        match read_store(store.path()) {
            Err(SurveyError::CorruptRecord { offset, line, .. }) => {
                assert_eq!(offset, good_len);
                assert_eq!(line, 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncated_tail_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let store = ResponseStore::open(dir.path()).unwrap();
        store.append(&response("a")).unwrap();
        let mut f = OpenOptions::new().append(true).open(store.path()).unwrap();
        f.write_all(b"{\"survey_id\":").unwrap();
        assert!(matches!(
            read_store(store.path()),
            Err(SurveyError::CorruptRecord { line: 2, .. })
        ));
    }

    #[test]
    fn invalid_record_is_rejected_on_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(STORE_FILE);
        let mut v = serde_json::to_value(response("a")).unwrap();
        v["record"]["outcome"] = "L_NN".into();
        std::fs::write(&path, format!("{v}\n")).unwrap();
        assert!(matches!(
            read_store(&path),
            Err(SurveyError::CorruptRecord { offset: 0, .. })
        ));
    }
}
