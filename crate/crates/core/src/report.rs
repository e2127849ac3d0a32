//! Named residual checks, serialized as JSON by the CLI.

use serde::Serialize;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize, PartialEq)]
pub struct ValidationReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `residual <= tolerance`. NaN residuals fail.
    pub fn push(&mut self, name: impl Into<String>, residual: f64, tolerance: f64) -> &mut Self {
        self.checks.push(CheckResult {
            name: name.into(),
            residual,
            tolerance,
            passed: residual <= tolerance,
            note: None,
        });
        self
    }

    /// Records a lower-bound check, `residual > threshold` (negative controls).
    pub fn push_above(&mut self, name: impl Into<String>, residual: f64, threshold: f64) -> &mut Self {
        self.checks.push(CheckResult {
            name: name.into(),
            residual,
            tolerance: threshold,
            passed: residual > threshold,
            note: Some("passes when residual exceeds tolerance".into()),
        });
        self
    }

    pub fn note(&mut self, note: impl Into<String>) -> &mut Self {
        if let Some(last) = self.checks.last_mut() {
            last.note = Some(note.into());
        }
        self
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.checks.extend(other.checks);
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}
