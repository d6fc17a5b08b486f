//! Check records, CSV tables and the output bundle of a run.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// How a value is compared with its target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|value - target| <= tolerance * |target|`.
    Relative,
    /// `|value - target| <= tolerance`.
    Absolute,
    /// `value <= target + tolerance`.
    AtMost,
    /// `value >= target - tolerance`.
    AtLeast,
    /// Boolean outcome stored as 0 or 1.
    Holds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub check: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    fn build(check: impl Into<String>, value: f64, target: f64, tolerance: f64, comparison: Comparison) -> Self {
        let passed = value.is_finite()
            && match comparison {
                Comparison::Relative => (value - target).abs() <= tolerance * target.abs(),
                Comparison::Absolute => (value - target).abs() <= tolerance,
                Comparison::AtMost => value <= target + tolerance,
                Comparison::AtLeast => value >= target - tolerance,
                Comparison::Holds => value == 1.0,
            };
        Check {
            check: check.into(),
            value,
            target,
            tolerance,
            comparison,
            passed,
            note: None,
        }
    }

    pub fn relative(check: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Self::build(check, value, target, tolerance, Comparison::Relative)
    }

    pub fn absolute(check: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Self::build(check, value, target, tolerance, Comparison::Absolute)
    }

    pub fn at_most(check: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::build(check, value, bound, 0.0, Comparison::AtMost)
    }

    pub fn at_least(check: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::build(check, value, bound, 0.0, Comparison::AtLeast)
    }

    pub fn holds(check: impl Into<String>, ok: bool) -> Self {
        Self::build(check, if ok { 1.0 } else { 0.0 }, 1.0, 0.0, Comparison::Holds)
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// One line for terminal output.
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        match self.comparison {
            Comparison::Holds => format!("{verdict}  {}", self.check),
            Comparison::Relative => format!(
                "{verdict}  {}  value={:.6e} target={:.6e} rel_tol={:.1e}",
                self.check, self.value, self.target, self.tolerance
            ),
            _ => format!(
                "{verdict}  {}  value={:.6e} target={:.6e} tol={:.1e}",
                self.check, self.value, self.target, self.tolerance
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends a row of numbers, formatted losslessly.
    pub fn push(&mut self, row: &[f64]) {
        self.push_cells(row.iter().map(|v| format!("{v:e}")).collect());
    }

    pub fn push_cells(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }
}

/// Everything a command produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub command: String,
    pub resolution: String,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub summary: serde_json::Value,
}

impl RunOutput {
    pub fn new(command: impl Into<String>, resolution: impl Into<String>) -> Self {
        RunOutput {
            command: command.into(),
            resolution: resolution.into(),
            checks: Vec::new(),
            tables: Vec::new(),
            summary: serde_json::Value::Null,
        }
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn checks_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&serde_json::to_string(c)?);
            s.push('\n');
        }
        Ok(s)
    }

    /// Writes `checks.jsonl`, `summary.json` and one CSV per table into
    /// `dir`. Everything is rendered before the first file is created.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let mut files: Vec<(String, Vec<u8>)> = Vec::new();
        files.push(("checks.jsonl".into(), self.checks_jsonl()?.into_bytes()));
        let summary = serde_json::json!({
            "command": self.command,
            "resolution": self.resolution,
            "passed": self.all_passed(),
            "checks": self.checks.len(),
            "failed": self.checks.iter().filter(|c| !c.passed).map(|c| c.check.clone()).collect::<Vec<_>>(),
            "results": self.summary,
        });
        let mut text = serde_json::to_string_pretty(&summary)?;
        text.push('\n');
        files.push(("summary.json".into(), text.into_bytes()));
        for t in &self.tables {
            files.push((format!("{}.csv", t.name), t.to_csv()?));
        }
        fs::create_dir_all(dir)?;
        for (name, bytes) in files {
            let mut f = fs::File::create(dir.join(name))?;
            f.write_all(&bytes)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparisons() {
        assert!(Check::relative("a", 1.01, 1.0, 0.02).passed);
        assert!(!Check::relative("a", 1.03, 1.0, 0.02).passed);
        assert!(Check::at_most("b", 0.4, 0.5).passed);
        assert!(!Check::at_least("c", 0.4, 0.5).passed);
        assert!(!Check::relative("d", f64::NAN, 1.0, 1.0).passed);
        assert!(Check::holds("e", true).passed);
    }

    #[test]
    fn csv_has_header_and_lf() {
        let mut t = Table::new("t", &["x", "y"]);
        t.push(&[1.0, 0.5]);
        let s = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(s, "x,y\n1e0,5e-1\n");
    }

    #[test]
    fn jsonl_one_object_per_line() {
        let mut out = RunOutput::new("capacity", "coarse");
        out.check(Check::relative("k", 1.0, 1.0, 0.1));
        out.check(Check::holds("h", false).with_note("n"));
        let text = out.checks_jsonl().unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let v: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(v["passed"], false);
        assert_eq!(v["check"], "h");
        assert!(!out.all_passed());
    }

    #[test]
    fn records_round_trip() {
        let c = Check::relative("disc capacity", 0.2031, 2.0 / std::f64::consts::PI.powi(2), 0.05).with_note("x");
        let line = serde_json::to_string(&c).unwrap();
        let back: Check = serde_json::from_str(&line).unwrap();
        assert_eq!(back, c);
        assert_eq!(serde_json::to_string(&back).unwrap(), line);
    }
}
