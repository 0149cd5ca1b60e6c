use serde::{Deserialize, Serialize};

/// Direction of the check: `value <= tolerance` or `value >= tolerance`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
    /// Test-function id, time window or other detail.
    pub context: String,
}

impl ResidualReport {
    /// Passes when `value <= tolerance`.
    pub fn at_most(
        name: impl Into<String>,
        value: f64,
        tolerance: f64,
        context: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            comparison: Comparison::AtMost,
            pass: value <= tolerance,
            context: context.into(),
        }
    }

    /// Passes when `value >= tolerance` (used with a negative tolerance for
    /// one-sided inequalities).
    pub fn at_least(
        name: impl Into<String>,
        value: f64,
        tolerance: f64,
        context: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            comparison: Comparison::AtLeast,
            pass: value >= tolerance,
            context: context.into(),
        }
    }
}
