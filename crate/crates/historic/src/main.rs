use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use historic::{run, Command, Overrides};

#[derive(Parser)]
#[command(
    name = "historic",
    version,
    about = "Pressure, equilibrium states and certified lower bounds for historic sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON run configuration.
    #[arg(long, global = true, default_value = "historic.json")]
    config: PathBuf,
    /// Directory for the artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Number of construction levels (certify).
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Atoms enumerated per level before sampling (certify).
    #[arg(long, global = true)]
    atom_cap: Option<usize>,
    /// Fail instead of sampling atoms (certify).
    #[arg(long, global = true)]
    seedless: bool,
    /// Write JSON only, no CSV or text summaries.
    #[arg(long, global = true)]
    json_only: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Perron pressure, variational cross-check and cover bracket.
    Pressure,
    /// Equilibrium state of psi and its variational gap.
    Equilibrium,
    /// Katok partition function over a range of orders.
    Katok,
    /// Glue orbit segments and check the shadowing.
    Glue,
    /// Bracket for the BS dimension.
    BsDim,
    /// Full construction with every check and the certified lower bound.
    Certify,
    /// Level-set pressures over a grid of Birkhoff averages.
    Spectrum,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Pressure => Command::Pressure,
        Cmd::Equilibrium => Command::Equilibrium,
        Cmd::Katok => Command::Katok,
        Cmd::Glue => Command::Glue,
        Cmd::BsDim => Command::BsDim,
        Cmd::Certify => Command::Certify,
        Cmd::Spectrum => Command::Spectrum,
    };
    let overrides = Overrides {
        depth: cli.depth,
        atom_cap: cli.atom_cap,
        seedless: cli.seedless,
    };
    match run(command, &cli.config, &cli.out, cli.json_only, &overrides) {
        Ok(summary) => {
            // A closed pipe is not an error of the run.
            let _ = writeln!(std::io::stdout(), "{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "historic {}: {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
