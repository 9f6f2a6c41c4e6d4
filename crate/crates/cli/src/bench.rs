//! Size/power benchmark harness over the built-in scenarios.
//!
//! Each replication draws a fresh dataset from the scenario with seed
//! mix(seed, rep) and runs the requested test with its own derived seed;
//! replications fan out over the worker pool and the rejection count is
//! assembled by replication index, so the rate is identical for any worker
//! count.

use gausstest::ci_fnn::{self, CiFnnOptions, N3Mode};
use gausstest::ci_lasso;
use gausstest::ind;
use gausstest::simgen::{self, ScenarioSpec, Signal};
use gausstest::stream::mix;
use gausstest::MultiplierKind;
use rayon::prelude::*;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    Independence,
    CiLasso,
    CiFnn,
}

impl TestKind {
    pub fn name(&self) -> &'static str {
        match self {
            TestKind::Independence => "ind",
            TestKind::CiLasso => "ci-lasso",
            TestKind::CiFnn => "ci-fnn",
        }
    }
}

impl std::str::FromStr for TestKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ind" => Ok(TestKind::Independence),
            "ci-lasso" => Ok(TestKind::CiLasso),
            "ci-fnn" => Ok(TestKind::CiFnn),
            other => Err(format!("unknown test '{other}' (expected ind, ci-lasso or ci-fnn)")),
        }
    }
}

/// One benchmark configuration.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub example_id: u8,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub signal: Signal,
    pub replications: usize,
    pub test: TestKind,
    pub multiplier: MultiplierKind,
    pub n_draws: usize,
    pub alpha: f64,
    pub seed: u64,
    pub n3_mode: N3Mode,
    pub no_split: bool,
}

/// One benchmark outcome row.
#[derive(Debug, Clone, Serialize)]
pub struct BenchResult {
    pub example_id: u8,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub signal: String,
    pub test: String,
    pub multiplier: String,
    #[serde(rename = "N")]
    pub n_draws: usize,
    pub alpha: f64,
    pub replications: usize,
    /// Rejection fraction in [0,1].
    pub rejection_rate: f64,
    /// Binomial standard error √(r(1-r)/reps).
    pub std_error: f64,
    pub seed: u64,
    pub wall_time_s: f64,
}

impl BenchResult {
    /// Rate ×100 with one decimal, the table unit.
    pub fn rate_pct(&self) -> String {
        format!("{:.1}", 100.0 * self.rejection_rate)
    }
}

pub fn signal_label(signal: &Signal) -> String {
    match signal {
        Signal::K(k) => format!("k={k}"),
        Signal::Rho(r) => format!("rho={r}"),
        Signal::Null => "null".into(),
        Signal::Alternative => "alt".into(),
    }
}

/// Runs the benchmark and returns the result row.
pub fn bench(config: &BenchConfig) -> Result<BenchResult, CliError> {
    if config.replications == 0 {
        return Err(CliError::Config("replications must be >= 1".into()));
    }
    let conditional_example = config.example_id >= 6;
    match config.test {
        TestKind::Independence if conditional_example => {
            return Err(CliError::Config(format!(
                "example {} is a conditional scenario; use ci-lasso or ci-fnn",
                config.example_id
            )));
        }
        TestKind::CiLasso | TestKind::CiFnn if !conditional_example => {
            return Err(CliError::Config(format!(
                "example {} has no control block; use the ind test",
                config.example_id
            )));
        }
        _ => {}
    }
    // Fail fast on illegal scenario parameters.
    ScenarioSpec {
        example_id: config.example_id,
        n: config.n,
        p: config.p,
        m: config.m,
        signal: config.signal,
        seed: config.seed,
    }
    .validate()?;

    let start = std::time::Instant::now();
    let rejections: usize = (0..config.replications)
        .into_par_iter()
        .map(|rep| run_replication(config, rep as u64).map(usize::from))
        .collect::<Result<Vec<_>, CliError>>()?
        .into_iter()
        .sum();

    let rate = rejections as f64 / config.replications as f64;
    Ok(BenchResult {
        example_id: config.example_id,
        n: config.n,
        p: config.p,
        m: config.m,
        signal: signal_label(&config.signal),
        test: config.test.name().into(),
        multiplier: config.multiplier.name().into(),
        n_draws: config.n_draws,
        alpha: config.alpha,
        replications: config.replications,
        rejection_rate: rate,
        std_error: (rate * (1.0 - rate) / config.replications as f64).sqrt(),
        seed: config.seed,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn run_replication(config: &BenchConfig, rep: u64) -> Result<bool, CliError> {
    let data_seed = mix(config.seed, rep);
    let test_seed = mix(data_seed, 1);
    let spec = ScenarioSpec {
        example_id: config.example_id,
        n: config.n,
        p: config.p,
        m: config.m,
        signal: config.signal,
        seed: data_seed,
    };
    let (x, y, z) = simgen::generate(&spec)?;

    let report = match config.test {
        TestKind::Independence => ind::independence_test(
            &x,
            &y,
            config.multiplier,
            config.n_draws,
            config.alpha,
            1,
            test_seed,
        )?,
        TestKind::CiLasso => ci_lasso::ci_lasso_test(
            &x,
            &y,
            &z.expect("conditional scenario emits z"),
            config.multiplier,
            config.n_draws,
            config.alpha,
            test_seed,
            None,
        )?,
        TestKind::CiFnn => {
            let opts = CiFnnOptions {
                no_split: config.no_split,
                ..CiFnnOptions::default()
            };
            ci_fnn::ci_fnn_test_with(
                &x,
                &y,
                &z.expect("conditional scenario emits z"),
                config.multiplier,
                config.n_draws,
                config.alpha,
                config.n3_mode,
                test_seed,
                &opts,
            )?
            .report
        }
    };
    Ok(report.reject)
}
