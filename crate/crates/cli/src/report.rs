//! Reports: check records, JSON serialization and CSV tables.

use std::io;
use std::path::Path;

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Record {
    pub name: String,
    pub anchor: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Record {
    /// Passes when `value < threshold`; a NaN value fails.
    pub fn below(name: impl Into<String>, anchor: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.to_string(),
            value,
            threshold,
            pass: value < threshold,
        }
    }

    /// A yes/no property stored as a violation count against threshold 1.
    pub fn holds(name: impl Into<String>, anchor: &str, ok: bool) -> Self {
        Self::below(name, anchor, if ok { 0.0 } else { 1.0 }, 1.0)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Environment {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub tol_scale: f64,
    pub jobs: Option<usize>,
    pub config: Option<String>,
    pub timestamp: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub pass: bool,
    pub records: Vec<Record>,
    pub environment: Environment,
}

impl Report {
    pub fn new(command: &str, records: Vec<Record>, environment: Environment) -> Self {
        Self {
            command: command.to_string(),
            pass: records.iter().all(|r| r.pass),
            records,
            environment,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// A sampled curve destined for a CSV file.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(file: &str, header: &[&str]) -> Self {
        Self {
            file: file.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        let mut w = csv::Writer::from_path(dir.join(&self.file))?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> Environment {
        Environment {
            tool: "t",
            version: "0",
            seed: 1,
            tol_scale: 1.0,
            jobs: None,
            config: None,
            timestamp: "now".into(),
        }
    }

    #[test]
    fn overall_pass_is_conjunction() {
        let ok = Record::below("a", "x", 1.0, 2.0);
        let bad = Record::below("b", "x", f64::NAN, 2.0);
        assert!(!bad.pass);
        assert!(Report::new("c", vec![ok.clone()], env()).pass);
        assert!(!Report::new("c", vec![ok, bad], env()).pass);
        assert!(!Record::holds("h", "x", false).pass);
    }

    #[test]
    fn json_has_fields() {
        let r = Report::new("c", vec![Record::below("a", "anchor-a", 0.5, 1.0)], env());
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["records"][0]["anchor"], "anchor-a");
        assert_eq!(v["environment"]["seed"], 1);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("t.csv", &["x", "y"]);
        t.rows.push(vec![0.5, -1.25]);
        t.write(dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert_eq!(text, "x,y\n5e-1,-1.25e0\n");
    }
}
