//! `mvcs`: batch verification of coherent-state families.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mvcs_core::suite::{emit_report, parse_config, run_suite, Format, SuiteError, CHECKS, FAMILIES};

#[derive(Parser)]
#[command(name = "mvcs", version, about = "Verify module-valued coherent-state families")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks named in a JSON config.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = OutFormat::Json)]
        format: OutFormat,
        /// Overrides `output_path`; without either, the report goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the family keys.
    ListFamilies,
    /// Print the check keys.
    ListChecks,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

fn verify(config: PathBuf, format: OutFormat, out: Option<PathBuf>, seed: Option<u64>) -> Result<bool, SuiteError> {
    let text = fs::read_to_string(&config)
        .map_err(|e| SuiteError::Config(format!("cannot read {}: {e}", config.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    let report = run_suite(&cfg)?;
    let format = match format {
        OutFormat::Json => Format::Json,
        OutFormat::Csv => Format::Csv,
    };
    match out.or_else(|| cfg.output_path().map(PathBuf::from)) {
        Some(path) => emit_report(&report, format, &mut fs::File::create(path)?)?,
        None => emit_report(&report, format, &mut std::io::stdout().lock())?,
    }
    for c in report.checks.iter().filter(|c| !c.pass) {
        eprintln!("FAIL {}: defect {:e} > bound {:e}", c.name, c.defect, c.bound);
    }
    Ok(report.pass)
}

fn list(items: &[(&str, &str)]) -> ExitCode {
    let mut out = std::io::stdout().lock();
    for (key, about) in items {
        if writeln!(out, "{key:<14} {about}").is_err() {
            return ExitCode::from(3);
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    match cli.command {
        Command::ListFamilies => list(FAMILIES),
        Command::ListChecks => list(CHECKS),
        Command::Verify { config, format, out, seed } => {
            // a panic is an internal error, not a check failure
            match std::panic::catch_unwind(|| verify(config, format, out, seed)) {
                Ok(Ok(true)) => ExitCode::SUCCESS,
                Ok(Ok(false)) => ExitCode::from(1),
                Ok(Err(e)) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
                Err(_) => ExitCode::from(3),
            }
        }
    }
}
