//! Experiment orchestration: configuration, mode dispatch and CSV/JSON
//! artifacts.

pub mod config;
pub mod modes;
pub mod output;

use std::path::PathBuf;

pub use config::{Cli, ExperimentConfig, Mode, OutputFormat};
pub use modes::{emit_phase_diagram, phase_diagram_rows, PhaseRow};

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_VERIFICATION_FAILED: i32 = 1;
pub const EXIT_INVALID_CONFIG: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] frustra_core::Error),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => EXIT_INVALID_CONFIG,
            _ => EXIT_VERIFICATION_FAILED,
        }
    }
}

/// Artifacts and human-readable summary of one run.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub artifacts: Vec<PathBuf>,
    pub lines: Vec<String>,
    /// A verification mode found a mismatch.
    pub failed: bool,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.failed {
            EXIT_VERIFICATION_FAILED
        } else {
            EXIT_SUCCESS
        }
    }
}

pub fn run(config: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    match config.mode {
        Mode::Count => modes::count(config),
        Mode::PhaseDiagram => modes::phase_diagram(config),
        Mode::SolveExact => modes::solve_exact(config),
        Mode::Product => modes::product(config),
        Mode::Tebd => modes::tebd(config),
        Mode::OracleCheck => modes::oracle_check(config),
        Mode::AppendixVerify => modes::appendix_verify(config),
    }
}

/// Parse, validate and run; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID_CONFIG } else { EXIT_SUCCESS };
        }
    };
    let outcome = ExperimentConfig::from_cli(&cli).and_then(|cfg| run(&cfg));
    match outcome {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            for path in &report.artifacts {
                println!("wrote {}", path.display());
            }
            report.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
