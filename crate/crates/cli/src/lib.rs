//! Experiment harness around `ssep-core`: config resolution, seeded
//! parallel runs and CSV/JSON output.

pub mod config;
pub mod experiments;
pub mod output;

use thiserror::Error;

pub use config::{resolve, Args, Experiment, Resolved, RunSettings};
pub use experiments::{run_experiment, Report};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("output error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Io(_) => 1,
            Self::Numerical(_) => 2,
        }
    }
}

impl From<ssep_core::Error> for CliError {
    fn from(e: ssep_core::Error) -> Self {
        use ssep_core::Error as E;
        match e {
            E::InvalidArgument(_) | E::ProfileParse(_) | E::SupportOverflow { .. } => Self::Config(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

/// Exit status of an identity-check failure.
pub const EXIT_IDENTITY: i32 = 3;

/// Runs a resolved experiment and writes its outputs; returns the exit
/// status.
pub fn execute(r: &Resolved) -> Result<i32, CliError> {
    if let Some(n) = r.settings.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let report = run_experiment(r)?;
    let paths = output::write_report(r, &report)?;
    for p in &paths {
        println!("wrote {}", p.display());
    }
    Ok(if report.identity_failure { EXIT_IDENTITY } else { 0 })
}
