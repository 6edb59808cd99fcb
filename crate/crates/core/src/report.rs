//! Verification records and the versioned JSON report.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Measured and recorded, never asserted.
    ReportedOnly,
    Error,
}

/// One named check of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    /// The identity or relation being checked, or `"plumbing"`.
    pub reference: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub values: BTreeMap<String, f64>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckRecord {
    /// Passes iff `residual <= tolerance` (NaN fails).
    pub fn assert_le(check: impl Into<String>, reference: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        let verdict = if residual <= tolerance { Verdict::Pass } else { Verdict::Fail };
        Self {
            check: check.into(),
            reference: reference.into(),
            residual: Some(residual),
            tolerance: Some(tolerance),
            values: BTreeMap::new(),
            verdict,
            detail: None,
        }
    }

    pub fn reported(check: impl Into<String>, reference: impl Into<String>) -> Self {
        Self {
            check: check.into(),
            reference: reference.into(),
            residual: None,
            tolerance: None,
            values: BTreeMap::new(),
            verdict: Verdict::ReportedOnly,
            detail: None,
        }
    }

    pub fn error(check: impl Into<String>, reference: impl Into<String>, err: &crate::Error) -> Self {
        let mut rec = Self::reported(check, reference);
        rec.verdict = Verdict::Error;
        rec.detail = Some(err.to_string());
        if let Some(x) = err.abscissa() {
            rec.values.insert("x".into(), x);
        }
        rec
    }

    pub fn with_residual(mut self, residual: f64) -> Self {
        self.residual = Some(residual);
        self
    }

    pub fn with_value(mut self, name: impl Into<String>, value: f64) -> Self {
        self.values.insert(name.into(), value);
        self
    }

    pub fn with_complex(self, name: &str, value: num_complex::Complex64) -> Self {
        self.with_value(format!("re_{name}"), value.re)
            .with_value(format!("im_{name}"), value.im)
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn passed(&self) -> bool {
        matches!(self.verdict, Verdict::Pass | Verdict::ReportedOnly)
    }
}

/// A named table of numbers, written out as CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Trace {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub cells_per_period: usize,
    pub integrator: String,
    pub version: String,
}

/// Results of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub scenario: String,
    pub kind: String,
    pub records: Vec<CheckRecord>,
    pub metadata: Metadata,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing_ms: Option<f64>,
    #[serde(skip)]
    pub traces: Vec<Trace>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.records.iter().all(CheckRecord::passed)
    }

    pub fn record(&self, check: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.check == check)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub reported_only: usize,
    pub error: usize,
}

/// Whole-run report, the JSON document written by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: u32,
    pub scenarios: Vec<VerificationReport>,
    pub summary: Summary,
}

impl RunReport {
    pub fn new(scenarios: Vec<VerificationReport>) -> Self {
        let mut summary = Summary::default();
        for r in scenarios.iter().flat_map(|s| &s.records) {
            match r.verdict {
                Verdict::Pass => summary.pass += 1,
                Verdict::Fail => summary.fail += 1,
                Verdict::ReportedOnly => summary.reported_only += 1,
                Verdict::Error => summary.error += 1,
            }
        }
        Self {
            schema: SCHEMA_VERSION,
            scenarios,
            summary,
        }
    }

    /// 0 iff every asserted check passed and no scenario errored.
    pub fn exit_status(&self) -> i32 {
        if self.summary.fail == 0 && self.summary.error == 0 {
            0
        } else {
            1
        }
    }

    pub fn strip_timings(&mut self) {
        for s in &mut self.scenarios {
            s.timing_ms = None;
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_residual_fails() {
        assert_eq!(CheckRecord::assert_le("x", "plumbing", f64::NAN, 1.0).verdict, Verdict::Fail);
        assert_eq!(CheckRecord::assert_le("x", "plumbing", 0.5, 1.0).verdict, Verdict::Pass);
    }

    #[test]
    fn reported_only_never_fails_the_run() {
        let meta = Metadata {
            cells_per_period: 8,
            integrator: "dopri5".into(),
            version: "0".into(),
        };
        let report = VerificationReport {
            scenario: "s".into(),
            kind: "dirac".into(),
            records: vec![
                CheckRecord::reported("scan", "plumbing").with_residual(1e3),
                CheckRecord::assert_le("ok", "plumbing", 0.0, 1.0),
            ],
            metadata: meta,
            timing_ms: Some(1.0),
            traces: vec![],
        };
        let run = RunReport::new(vec![report]);
        assert_eq!(run.exit_status(), 0);
        assert_eq!(run.summary.reported_only, 1);
        let json = run.to_json();
        assert!(json.contains("\"schema\": 1"));
        assert!(json.contains("\"verdict\": \"reported-only\""));
    }
}
