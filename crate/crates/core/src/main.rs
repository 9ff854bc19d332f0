use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use nls_lab::runner::{resolve_workers, run, Invocation, Subcommand, EXIT_USAGE};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Threshold,
    NamedThresholds,
    Groundstate,
    Evolve,
    Scatter,
    Verify,
    Sweep,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Threshold => Subcommand::Threshold,
            Command::NamedThresholds => Subcommand::NamedThresholds,
            Command::Groundstate => Subcommand::Groundstate,
            Command::Evolve => Subcommand::Evolve,
            Command::Scatter => Subcommand::Scatter,
            Command::Verify => Subcommand::Verify,
            Command::Sweep => Subcommand::Sweep,
        }
    }
}

/// Threshold masses, pseudo-conformal evolution and scattering diagnostics
/// for NLS with a defocusing q-power and a focusing p-power.
#[derive(Parser, Debug)]
#[command(name = "nls-lab", version)]
struct Cli {
    #[arg(value_enum)]
    subcommand: Command,
    /// Flat `key = value` configuration with dotted keys.
    #[arg(long)]
    config: PathBuf,
    /// Output prefix; files are written as `<prefix>.<name>`.
    #[arg(long)]
    out: Option<String>,
    /// Worker threads (default: NLS_LAB_WORKERS, then all cores).
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = match resolve_workers(cli.workers) {
        Ok(n) => n,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    let inv = Invocation { subcommand: cli.subcommand.into(), config_path: cli.config, out: cli.out, workers };
    let rep = run(&inv);
    // a closed pipe on stdout must not turn a finished run into a panic
    let mut out = std::io::stdout().lock();
    for line in &rep.stdout {
        let _ = writeln!(out, "{line}");
    }
    if let Some(m) = &rep.manifest {
        let _ = writeln!(out, "manifest: {}", m.display());
    }
    let mut err = std::io::stderr().lock();
    for line in &rep.stderr {
        let _ = writeln!(err, "{line}");
    }
    ExitCode::from(rep.exit_code as u8)
}
