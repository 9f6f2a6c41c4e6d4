//! Argument definitions and command implementations.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gausstest::ci_fnn::{CiFnnOptions, N3Mode};
use gausstest::ci_lasso::CiLassoOptions;
use gausstest::gaussianize::GaussianizeOptions;
use gausstest::ind::IndependenceOptions;
use gausstest::simgen::Signal;
use gausstest::{DataMatrix, MultiplierKind, TestReport};
use ndarray::Array2;

use crate::bench::{self, BenchConfig, TestKind};
use crate::bh::bh_adjust;
use crate::csvio::{self, ColumnRanges};
use crate::report::{ArgmaxReport, RunReport};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "gausstest",
    about = "Rank-based independence and conditional-independence tests with multiplier bootstrap",
    version
)]
pub struct Cli {
    /// Worker threads for replications and bootstrap draws (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one test on CSV data and emit a JSON report.
    Run(RunArgs),
    /// Estimate size/power of a test on a built-in scenario.
    Bench(BenchArgs),
    /// Benjamini-Hochberg adjustment across a manifest of test reports.
    Bh(BhArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Which test to run: ind, ci-lasso or ci-fnn.
    #[arg(long)]
    pub test: String,

    /// Input CSV (comma-separated, '.' decimal, optional header row).
    #[arg(long)]
    pub input: PathBuf,

    /// 1-based column ranges of the X block, e.g. "1-3" or "1-2,7".
    #[arg(long)]
    pub x: String,

    /// 1-based column ranges of the Y block.
    #[arg(long)]
    pub y: String,

    /// 1-based column ranges of the Z block (conditional tests).
    #[arg(long)]
    pub z: Option<String>,

    /// Multiplier family: gaussian, mammen or rademacher.
    #[arg(long, default_value = "rademacher")]
    pub multiplier: String,

    /// Bootstrap draw count N.
    #[arg(long, default_value_t = 5000)]
    pub boot: usize,

    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Aggregate over the T largest coordinates (1 = max statistic).
    #[arg(long = "top-t", default_value_t = 1)]
    pub top_t: usize,

    /// Run seed; GAUSSTEST_SEED applies when the flag is absent.
    #[arg(long, env = "GAUSSTEST_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Third-split sizing for ci-fnn: auto, remainder, or a fixed count.
    #[arg(long, default_value = "auto")]
    pub n3: String,

    /// Use the full sample in every ci-fnn step instead of splitting.
    #[arg(long = "no-split")]
    pub no_split: bool,

    /// Break ties with seeded jitter of 1e-9 times the column range.
    #[arg(long)]
    pub jitter: bool,

    /// Outer units per ci-fnn regression network.
    #[arg(long = "fnn-units", default_value_t = 32)]
    pub fnn_units: usize,

    /// Training epochs per ci-fnn regression network.
    #[arg(long = "fnn-epochs", default_value_t = 500)]
    pub fnn_epochs: usize,

    /// Dump the Algorithm-1 candidate curve as CSV.
    #[arg(long = "n3-diag")]
    pub n3_diag: Option<PathBuf>,

    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scenario number, 1-10.
    #[arg(long)]
    pub example: u8,

    #[arg(long)]
    pub n: usize,

    /// Block dimension (q = p).
    #[arg(long)]
    pub p: usize,

    /// Control dimension for examples 6-10.
    #[arg(long, default_value_t = 0)]
    pub m: usize,

    /// Signal: "k=<count>", "rho=<level>", "null" or "alt".
    #[arg(long)]
    pub signal: String,

    #[arg(long)]
    pub reps: usize,

    /// Which test to run: ind, ci-lasso or ci-fnn.
    #[arg(long)]
    pub test: String,

    #[arg(long, default_value = "rademacher")]
    pub multiplier: String,

    #[arg(long, default_value_t = 5000)]
    pub boot: usize,

    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    #[arg(long, env = "GAUSSTEST_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Third-split sizing for ci-fnn: auto, remainder, or a fixed count.
    #[arg(long, default_value = "auto")]
    pub n3: String,

    #[arg(long = "no-split")]
    pub no_split: bool,

    /// Append the result row to this CSV (header written when new).
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Write the first replication's generated dataset to this CSV
    /// (columns x1..xp, y1..yq, then z1..zm when present).
    #[arg(long = "dump-data")]
    pub dump_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BhArgs {
    /// FDR level Q.
    #[arg(long = "bh")]
    pub q: f64,

    /// JSON reports produced by `gausstest run`.
    pub reports: Vec<PathBuf>,

    /// Plain file with one p-value per line (appended to the manifest).
    #[arg(long)]
    pub pvalues: Option<PathBuf>,

    /// Write the adjusted table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn parse_multiplier(s: &str) -> Result<MultiplierKind, CliError> {
    s.parse::<MultiplierKind>().map_err(CliError::from)
}

fn parse_ranges(s: &str, name: &str) -> Result<ColumnRanges, CliError> {
    s.parse::<ColumnRanges>()
        .map_err(|e| CliError::Config(format!("bad {name} ranges: {e}")))
}

fn parse_n3(s: &str) -> Result<N3Mode, CliError> {
    match s {
        "auto" => Ok(N3Mode::Auto),
        "remainder" => Ok(N3Mode::Remainder),
        other => other
            .parse::<usize>()
            .map(N3Mode::Fixed)
            .map_err(|_| CliError::Config(format!("--n3 takes auto, remainder or a count, got '{other}'"))),
    }
}

pub fn parse_signal(s: &str) -> Result<Signal, CliError> {
    if let Some(v) = s.strip_prefix("k=") {
        return v
            .parse::<usize>()
            .map(Signal::K)
            .map_err(|_| CliError::Config(format!("bad signal '{s}'")));
    }
    if let Some(v) = s.strip_prefix("rho=") {
        return v
            .parse::<f64>()
            .map(Signal::Rho)
            .map_err(|_| CliError::Config(format!("bad signal '{s}'")));
    }
    match s {
        "null" => Ok(Signal::Null),
        "alt" | "alternative" => Ok(Signal::Alternative),
        other => Err(CliError::Config(format!(
            "signal must be k=<count>, rho=<level>, null or alt; got '{other}'"
        ))),
    }
}

pub fn run_command(args: &RunArgs) -> Result<RunReport, CliError> {
    let start = std::time::Instant::now();
    let table = csvio::read_csv(&args.input)?;

    let x_ranges = parse_ranges(&args.x, "x")?;
    let y_ranges = parse_ranges(&args.y, "y")?;
    let z_ranges = args.z.as_deref().map(|s| parse_ranges(s, "z")).transpose()?;
    let mut blocks = vec![("x", &x_ranges), ("y", &y_ranges)];
    if let Some(z) = &z_ranges {
        blocks.push(("z", z));
    }
    csvio::check_disjoint(&blocks)?;

    let x = csvio::extract_block(&table, &x_ranges, "x")?;
    let y = csvio::extract_block(&table, &y_ranges, "y")?;
    let z = z_ranges
        .as_ref()
        .map(|r| csvio::extract_block(&table, r, "z"))
        .transpose()?;

    let multiplier = parse_multiplier(&args.multiplier)?;
    let gaussianize = GaussianizeOptions {
        jitter_seed: args.jitter.then_some(args.seed),
    };

    let (report, m_dim): (TestReport, usize) = match args.test.as_str() {
        "ind" => {
            let opts = IndependenceOptions {
                gaussianize,
                ..IndependenceOptions::default()
            };
            let rep = gausstest::ind::independence_test_with(
                &x,
                &y,
                multiplier,
                args.boot,
                args.alpha,
                args.top_t,
                args.seed,
                &opts,
            )?;
            (rep, 0)
        }
        "ci-lasso" => {
            let z = match z {
                Some(z) => z,
                None => DataMatrix::new(Array2::zeros((x.n(), 0)))?,
            };
            let opts = CiLassoOptions {
                gaussianize,
                ..CiLassoOptions::default()
            };
            let rep = gausstest::ci_lasso::ci_lasso_test_with(
                &x,
                &y,
                &z,
                multiplier,
                args.boot,
                args.alpha,
                args.seed,
                None,
                &opts,
            )?;
            let m = z.k();
            (rep, m)
        }
        "ci-fnn" => {
            let z = z.ok_or_else(|| {
                CliError::Config("ci-fnn needs --z column ranges".into())
            })?;
            let opts = CiFnnOptions {
                no_split: args.no_split,
                gaussianize,
                fnn: gausstest::ci_fnn::FnnSettings {
                    outer_units: args.fnn_units,
                    epochs: args.fnn_epochs,
                    ..Default::default()
                },
                ..CiFnnOptions::default()
            };
            let outcome = gausstest::ci_fnn::ci_fnn_test_with(
                &x,
                &y,
                &z,
                multiplier,
                args.boot,
                args.alpha,
                parse_n3(&args.n3)?,
                args.seed,
                &opts,
            )?;
            if let Some(path) = &args.n3_diag {
                write_n3_diag(path, outcome.split.n3(), outcome.n3_curve.as_deref())?;
            }
            let m = z.k();
            (outcome.report, m)
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown test '{other}' (expected ind, ci-lasso or ci-fnn)"
            )))
        }
    };

    Ok(RunReport {
        test: args.test.clone(),
        statistic: report.statistic,
        critical_value: report.critical_value,
        p_value: report.p_value,
        alpha: report.alpha,
        reject: report.reject,
        multiplier: report.multiplier.name().into(),
        n_draws: report.n_draws,
        seed: args.seed,
        argmax: ArgmaxReport {
            x_col: report.argmax.0 + 1,
            y_col: report.argmax.1 + 1,
        },
        n: x.n(),
        p: x.k(),
        q: y.k(),
        m: m_dim,
        warnings: report.warnings,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn write_n3_diag(
    path: &Path,
    selected: usize,
    curve: Option<&[(usize, f64)]>,
) -> Result<(), CliError> {
    let mut out = String::from("candidate_n3,rejection_rate,selected\n");
    match curve {
        Some(points) => {
            for &(l, rate) in points {
                out.push_str(&format!("{l},{rate},{}\n", (l == selected) as u8));
            }
        }
        None => out.push_str(&format!("{selected},,1\n")),
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn bench_command(args: &BenchArgs) -> Result<bench::BenchResult, CliError> {
    let config = BenchConfig {
        example_id: args.example,
        n: args.n,
        p: args.p,
        m: args.m,
        signal: parse_signal(&args.signal)?,
        replications: args.reps,
        test: args
            .test
            .parse::<TestKind>()
            .map_err(CliError::Config)?,
        multiplier: parse_multiplier(&args.multiplier)?,
        n_draws: args.boot,
        alpha: args.alpha,
        seed: args.seed,
        n3_mode: parse_n3(&args.n3)?,
        no_split: args.no_split,
    };
    if let Some(path) = &args.dump_data {
        dump_scenario_csv(&config, path)?;
    }
    let result = bench::bench(&config)?;

    if let Some(path) = &args.out {
        append_bench_csv(path, &result)?;
    }
    Ok(result)
}

// The dataset replication 0 would see, for cross-tool validation.
fn dump_scenario_csv(config: &BenchConfig, path: &Path) -> Result<(), CliError> {
    use gausstest::simgen::{generate, ScenarioSpec};
    use gausstest::stream::mix;

    let spec = ScenarioSpec {
        example_id: config.example_id,
        n: config.n,
        p: config.p,
        m: config.m,
        signal: config.signal,
        seed: mix(config.seed, 0),
    };
    let (x, y, z) = generate(&spec)?;
    let mut out = String::new();
    let mut headers: Vec<String> = (1..=x.k()).map(|j| format!("x{j}")).collect();
    headers.extend((1..=y.k()).map(|j| format!("y{j}")));
    if let Some(z) = &z {
        headers.extend((1..=z.k()).map(|j| format!("z{j}")));
    }
    out.push_str(&headers.join(","));
    out.push('\n');
    for i in 0..x.n() {
        let mut cells: Vec<String> = x.values().row(i).iter().map(f64::to_string).collect();
        cells.extend(y.values().row(i).iter().map(f64::to_string));
        if let Some(z) = &z {
            cells.extend(z.values().row(i).iter().map(f64::to_string));
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn append_bench_csv(path: &Path, result: &bench::BenchResult) -> Result<(), CliError> {
    let new_file = !path.exists();
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    let mut writer = csv::WriterBuilder::new()
        .has_headers(new_file)
        .from_writer(file);
    writer
        .serialize(result)
        .map_err(|e| CliError::Data(format!("CSV write failure: {e}")))?;
    writer
        .flush()
        .map_err(|e| CliError::Data(format!("CSV write failure: {e}")))?;
    Ok(())
}

/// Outcome of the `bh` command, one row per input p-value.
#[derive(Debug)]
pub struct BhTable {
    pub rows: Vec<(String, f64, f64, bool)>,
    pub q: f64,
}

impl BhTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("source,p_value,adjusted_p,reject\n");
        for (source, p, adj, reject) in &self.rows {
            out.push_str(&format!("{source},{p},{adj},{}\n", *reject as u8));
        }
        out
    }

    pub fn rejected(&self) -> usize {
        self.rows.iter().filter(|r| r.3).count()
    }
}

pub fn bh_command(args: &BhArgs) -> Result<BhTable, CliError> {
    let mut sources: Vec<String> = Vec::new();
    let mut pvalues: Vec<f64> = Vec::new();

    for path in &args.reports {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        let report = RunReport::from_json(&text)
            .map_err(|e| CliError::Data(format!("bad report {}: {e}", path.display())))?;
        sources.push(path.display().to_string());
        pvalues.push(report.p_value);
    }
    if let Some(path) = &args.pvalues {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let p: f64 = line.parse().map_err(|_| {
                CliError::Data(format!("bad p-value '{line}' at line {}", i + 1))
            })?;
            sources.push(format!("{}:{}", path.display(), i + 1));
            pvalues.push(p);
        }
    }
    if pvalues.is_empty() {
        return Err(CliError::Config(
            "no p-values: pass report files and/or --pvalues".into(),
        ));
    }

    let (reject, adjusted) = bh_adjust(&pvalues, args.q)?;
    let rows = sources
        .into_iter()
        .zip(pvalues)
        .zip(adjusted)
        .zip(reject)
        .map(|(((source, p), adj), rej)| (source, p, adj, rej))
        .collect();
    Ok(BhTable { rows, q: args.q })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_parsing() {
        assert_eq!(parse_signal("k=10").unwrap(), Signal::K(10));
        assert_eq!(parse_signal("rho=0.7").unwrap(), Signal::Rho(0.7));
        assert_eq!(parse_signal("null").unwrap(), Signal::Null);
        assert_eq!(parse_signal("alt").unwrap(), Signal::Alternative);
        assert!(parse_signal("qq=3").is_err());
    }

    #[test]
    fn n3_parsing() {
        assert_eq!(parse_n3("auto").unwrap(), N3Mode::Auto);
        assert_eq!(parse_n3("remainder").unwrap(), N3Mode::Remainder);
        assert_eq!(parse_n3("17").unwrap(), N3Mode::Fixed(17));
        assert!(parse_n3("x").is_err());
    }
}
