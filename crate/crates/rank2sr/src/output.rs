//! Stage artifacts: numeric CSV tables and JSON reports, each checked against its schema
//! after writing.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, relation: Relation::AtMost, bound, pass: value <= bound }
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, relation: Relation::AtLeast, bound, pass: value >= bound }
    }
}

/// Numeric table written as CSV with a header row.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(file: impl Into<String>, header: &[&str]) -> Self {
        Table { file: file.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct StageReport {
    pub stage: String,
    pub index: usize,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub files: Vec<String>,
    pub summary: serde_json::Value,
}

pub fn write_table(dir: &Path, t: &Table) -> Result<PathBuf> {
    let path = dir.join(&t.file);
    let mut w = csv::Writer::from_path(&path).map_err(csv_io)?;
    w.write_record(&t.header).map_err(csv_io)?;
    for r in &t.rows {
        w.serialize(r).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn csv_io(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

fn schema_error(path: &Path, detail: impl std::fmt::Display) -> CliError {
    CliError::Invariant { name: "output-schema".into(), detail: format!("{}: {detail}", path.display()) }
}

/// A CSV table must have the expected header and only finite-or-NaN numeric cells of matching width.
pub fn validate_table(path: &Path, header: &[String]) -> Result<()> {
    let mut r = csv::Reader::from_path(path).map_err(|e| schema_error(path, e))?;
    let got: Vec<String> = r.headers().map_err(|e| schema_error(path, e))?.iter().map(String::from).collect();
    if got != header {
        return Err(schema_error(path, format!("header {got:?}, expected {header:?}")));
    }
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| schema_error(path, e))?;
        if rec.len() != header.len() {
            return Err(schema_error(path, format!("row {k} has {} cells", rec.len())));
        }
        for cell in rec.iter() {
            let v: f64 = cell.parse().map_err(|_| schema_error(path, format!("row {k}: `{cell}` is not a number")))?;
            if v.is_infinite() {
                return Err(schema_error(path, format!("row {k}: infinite value")));
            }
        }
    }
    Ok(())
}

/// A stage report must round-trip through [`StageReport`] and list files that exist next to it.
pub fn validate_report(path: &Path) -> Result<StageReport> {
    let src = fs::read_to_string(path)?;
    let rep: StageReport = serde_json::from_str(&src).map_err(|e| schema_error(path, e))?;
    if rep.passed != rep.checks.iter().all(|c| c.pass) {
        return Err(schema_error(path, "`passed` disagrees with the checks"));
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    for f in &rep.files {
        if !dir.join(f).is_file() {
            return Err(schema_error(path, format!("listed file {f} is missing")));
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_round_trip_and_validate() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("a.csv", &["t", "x"]);
        t.push(vec![0.0, 0.1]);
        t.push(vec![1e-20, f64::NAN]);
        let p = write_table(dir.path(), &t).unwrap();
        validate_table(&p, &t.header).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text, "t,x\n0.0,0.1\n1e-20,NaN\n");
        assert!(validate_table(&p, &["t".into()]).is_err());
        fs::write(&p, "t,x\n0.0,abc\n").unwrap();
        assert!(matches!(validate_table(&p, &t.header), Err(CliError::Invariant { .. })));
    }

    #[test]
    fn reports_must_be_consistent() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        let mut rep = StageReport {
            stage: "x".into(),
            index: 0,
            passed: true,
            checks: vec![Check::at_most("c", 1.0, 2.0)],
            files: vec![],
            summary: serde_json::json!({}),
        };
        write_json(&p, &rep).unwrap();
        validate_report(&p).unwrap();
        rep.passed = false;
        write_json(&p, &rep).unwrap();
        assert!(validate_report(&p).is_err());
        rep.passed = true;
        rep.files = vec!["missing.csv".into()];
        write_json(&p, &rep).unwrap();
        assert!(validate_report(&p).is_err());
    }
}
