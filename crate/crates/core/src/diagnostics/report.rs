use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    /// Reported only; no threshold applies.
    Info,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost,
    AtLeast,
}

/// One named check: a primary value, an optional threshold and the verdict
/// derived from the two, plus any auxiliary values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub threshold: Option<f64>,
    pub bound: Option<Bound>,
    pub verdict: Verdict,
    pub values: BTreeMap<String, f64>,
    pub note: Option<String>,
}

impl CheckResult {
    fn with_bound(name: impl Into<String>, value: f64, threshold: f64, bound: Bound) -> Self {
        let ok = match bound {
            Bound::AtMost => value <= threshold,
            Bound::AtLeast => value >= threshold,
        };
        Self {
            name: name.into(),
            value,
            threshold: Some(threshold),
            bound: Some(bound),
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            values: BTreeMap::new(),
            note: None,
        }
    }

    /// PASS iff `value ≤ threshold` (NaN fails).
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::with_bound(name, value, threshold, Bound::AtMost)
    }

    /// PASS iff `value ≥ threshold` (NaN fails).
    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::with_bound(name, value, threshold, Bound::AtLeast)
    }

    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold: None,
            bound: None,
            verdict: Verdict::Info,
            values: BTreeMap::new(),
            note: None,
        }
    }

    /// A check that could not be evaluated; always FAIL.
    pub fn failed(name: impl Into<String>, note: impl Into<String>) -> Self {
        Self {
            verdict: Verdict::Fail,
            note: Some(note.into()),
            ..Self::info(name, f64::NAN)
        }
    }

    pub fn with_value(mut self, key: impl Into<String>, v: f64) -> Self {
        self.values.insert(key.into(), v);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub mesh_n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub stress_model: String,
    pub conductivity_model: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub metadata: ReportMetadata,
    pub checks: Vec<CheckResult>,
}

impl DiagnosticsReport {
    pub fn new(metadata: ReportMetadata) -> Self {
        Self {
            metadata,
            checks: Vec::new(),
        }
    }

    /// Adds a check; names must be unique within a report.
    pub fn push(&mut self, check: CheckResult) -> Result<()> {
        if self.get(&check.name).is_some() {
            return Err(Error::Contract(format!(
                "check {:?} already present in the report",
                check.name
            )));
        }
        self.checks.push(check);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed())
    }
}
