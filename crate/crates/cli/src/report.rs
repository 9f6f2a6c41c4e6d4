//! JSON report emitted by `gausstest run`.

use serde::{Deserialize, Serialize};

/// Maximizing entry of the mean contribution matrix, as 1-based column
/// coordinates within the X and Y blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgmaxReport {
    pub x_col: usize,
    pub y_col: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub test: String,
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub multiplier: String,
    #[serde(rename = "N")]
    pub n_draws: usize,
    pub seed: u64,
    pub argmax: ArgmaxReport,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub m: usize,
    pub warnings: Vec<String>,
    /// Wall-clock duration; the only field allowed to differ between
    /// identical runs.
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}
