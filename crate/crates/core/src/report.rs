//! Machine-readable experiment records: JSON lines, one record per line,
//! plus the CSV shape used for difference profiles.

use std::io::Write;

use serde::{Deserialize, Serialize};

/// One verification instance or constant-table row.
/// Fields follow the report schema `{lemma, instance, lhs, rhs, constant}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub lemma: String,
    pub instance: String,
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
}

/// A single record in an experiment stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub command: String,
    pub instance: String,
    pub inputs: serde_json::Value,
    pub measured: serde_json::Value,
    pub verdict: String,
    pub constants: Vec<ConstantEntry>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEntry {
    pub name: String,
    pub value: String,
    pub provenance: String,
}

pub const VERDICT_PASS: &str = "pass";
pub const VERDICT_FAIL: &str = "fail";
pub const VERDICT_INFO: &str = "info";

impl ExperimentRecord {
    pub fn passed(&self) -> bool {
        self.verdict != VERDICT_FAIL
    }
}

/// Serialize records as JSON lines (UTF-8, one record per line).
pub fn write_json_lines<W: Write>(mut w: W, records: &[ExperimentRecord]) -> std::io::Result<()> {
    for r in records {
        let line = serde_json::to_string(r).expect("records serialize");
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn to_json_lines(records: &[ExperimentRecord]) -> String {
    let mut buf = Vec::new();
    write_json_lines(&mut buf, records).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Strip the timing field so two streams can be compared byte for byte.
pub fn strip_timing(records: &[ExperimentRecord]) -> Vec<ExperimentRecord> {
    records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.wall_ms = 0.0;
            r
        })
        .collect()
}
