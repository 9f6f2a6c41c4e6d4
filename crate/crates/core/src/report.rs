//! Common result type for all three tests.

use serde::{Deserialize, Serialize};

use crate::bootstrap::MultiplierKind;

/// Outcome of one hypothesis test run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub multiplier: MultiplierKind,
    /// Bootstrap draw count N.
    pub n_draws: usize,
    /// Aggregate descriptor ("max-abs" or "top-T-sum").
    pub aggregate: String,
    pub reject: bool,
    /// Zero-based (X-coordinate, Y-coordinate) of the maximizing entry of
    /// the mean contribution matrix.
    pub argmax: (usize, usize),
    pub warnings: Vec<String>,
}

impl TestReport {
    /// Assembles a report; `reject` is derived so the decision always equals
    /// `statistic > critical_value`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        statistic: f64,
        critical_value: f64,
        p_value: f64,
        alpha: f64,
        multiplier: MultiplierKind,
        n_draws: usize,
        aggregate: String,
        argmax: (usize, usize),
        warnings: Vec<String>,
    ) -> Self {
        TestReport {
            statistic,
            critical_value,
            p_value,
            alpha,
            multiplier,
            n_draws,
            aggregate,
            reject: statistic > critical_value,
            argmax,
            warnings,
        }
    }
}
