//! `novaclass` — command-line surface for the fault-diagnosis pipeline.
//!
//! Subcommands: `gen` (synthetic datasets), `train`, `eval`, `probe`
//! (novelty decision), `monitor` (streaming loop), `plot` (re-render text
//! exports as SVG). Every command resolves parameters as
//! flags > `NOVACLASS_SEED` (seed only) > config file > built-in defaults,
//! prints the effective seed, and is reproducible: same flags and seed,
//! same output bytes (timestamps appear only in the monitor event log).
//!
//! Exit codes: 0 success, 2 usage error (unknown command, missing or
//! malformed flag or config key), 1 anything else, always with a one-line
//! `error: ...` on stderr.

mod commands;
mod config;
mod reports;
mod svg;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Two-stage open-set vibration fault diagnosis: a wide-first-kernel 1-D CNN
/// over 1024-point windows plus a t-SNE / k-means novelty stage.
#[derive(Parser)]
#[command(name = "novaclass", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    Gen(commands::gen::GenArgs),
    Train(commands::train::TrainArgs),
    Eval(commands::eval::EvalArgs),
    Probe(commands::probe::ProbeArgs),
    Monitor(commands::monitor::MonitorArgs),
    Plot(commands::plot::PlotArgs),
}

/// CLI failures, split by exit code: usage problems exit 2 like clap's own
/// parse errors, everything else exits 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io { path: PathBuf, source: std::io::Error },
    Lib(novaclass::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage: {msg}"),
            CliError::Io { path, source } => {
                write!(f, "io: {}: {source}", path.display())
            }
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<novaclass::Error> for CliError {
    fn from(e: novaclass::Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            _ => ExitCode::from(1),
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    // Clap handles --help/--version (exit 0) and usage errors (exit 2).
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => commands::gen::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Probe(args) => commands::probe::run(args),
        Command::Monitor(args) => commands::monitor::run(args),
        Command::Plot(args) => commands::plot::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
