//! `jcryd` command line.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration or usage error,
//! 3 numerical failure, 4 verification failed.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

pub mod commands;
pub mod config;
pub mod emit;

use config::{Format, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numeric(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Dressed ladder, splittings and nonlinear shifts.
    Ladder,
    /// Per-flip peak positions over a detuning sweep, with optional drift bands.
    Peaks,
    /// Simulated microwave scan with peak extraction.
    Scan,
    /// Time-dependent ramp with adiabatic-following trace.
    Ramp,
    /// Splitting versus Rabi frequency, linear fits and their ratio.
    Fit,
    /// Symmetric model against the brute-force product space.
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "jcryd", version, about = "Jaynes-Cummings ladder of blockaded Rydberg ensembles")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output file (default: `output.path`, else stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let cfg = RunConfig::load(&args.config)?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let format = match args.format {
        Some(FormatArg::Csv) => Format::Csv,
        Some(FormatArg::Json) => Format::Json,
        None => cfg.output.format,
    };
    let outcome = match args.command {
        Command::Ladder => commands::ladder_table(&cfg)?,
        Command::Peaks => commands::peaks_table(&cfg, seed)?,
        Command::Scan => commands::scan_table(&cfg)?,
        Command::Ramp => commands::ramp_table(&cfg)?,
        Command::Fit => commands::fit_table(&cfg, seed)?,
        Command::Verify => commands::verify_table(&cfg, seed)?,
    };
    let text = outcome.table.render(format)?;
    match args.out.as_ref().or(cfg.output.path.as_ref()) {
        Some(path) => emit::write_atomic(path, &text)?,
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    if outcome.passed {
        Ok(())
    } else {
        Err(CliError::Verification("product-space check exceeded tolerance".into()))
    }
}

/// Parses `argv`, runs, reports errors on stderr and returns the exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("jcryd: {e}");
            e.exit_code()
        }
    }
}
