//! Command-line front end for the gausstest library: CSV ingestion with
//! block assignment, test execution with JSON reports, the
//! Benjamini–Hochberg multiple-testing adjustment, and the size/power
//! benchmark harness over the built-in scenario generators.

pub mod bench;
pub mod bh;
pub mod cli;
pub mod csvio;
pub mod report;

/// Process exit codes: 0 success, 2 configuration error, 3 data error.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

impl From<gausstest::Error> for CliError {
    fn from(e: gausstest::Error) -> Self {
        match e {
            gausstest::Error::Config(msg) => CliError::Config(msg),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
