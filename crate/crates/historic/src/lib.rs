//! Command line front end for `historic-core`: JSON configuration, one
//! subcommand per pipeline stage, JSON and CSV artifacts.
//!
//! Exit status: 0 when every requested check passes, 1 on IO or numerical
//! failure, 2 on configuration errors, 3 when a check fails.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::Path;

pub use config::Overrides;
pub use error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Pressure,
    Equilibrium,
    Katok,
    Glue,
    BsDim,
    Certify,
    Spectrum,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Pressure => "pressure",
            Command::Equilibrium => "equilibrium",
            Command::Katok => "katok",
            Command::Glue => "glue",
            Command::BsDim => "bs-dim",
            Command::Certify => "certify",
            Command::Spectrum => "spectrum",
        }
    }
}

/// Runs one command and writes its artifacts plus the `run.meta.json`
/// sidecar. Returns the summary on success.
pub fn run(
    command: Command,
    config: &Path,
    out_dir: &Path,
    json_only: bool,
    overrides: &Overrides,
) -> Result<String, CliError> {
    let started = output::unix_ms();
    let mut out = output::Artifacts::new(out_dir, json_only)?;
    let result = execute(command, config, overrides, &mut out);
    let exit_code = match &result {
        Ok(_) => 0,
        Err(e) => e.exit_code(),
    };
    let meta = output::RunMeta {
        command: command.name(),
        config: config.display().to_string(),
        version: env!("CARGO_PKG_VERSION"),
        started_unix_ms: started,
        finished_unix_ms: output::unix_ms(),
        exit_code,
        outputs: out.written(),
    };
    output::write_meta(out_dir, &meta)?;
    result
}

fn execute(
    command: Command,
    config: &Path,
    overrides: &Overrides,
    out: &mut output::Artifacts,
) -> Result<String, CliError> {
    let loaded = config::load(config)?;
    let outcome = match command {
        Command::Pressure => commands::pressure(&loaded, out)?,
        Command::Equilibrium => commands::equilibrium(&loaded, out)?,
        Command::Katok => commands::katok(&loaded, out)?,
        Command::Glue => commands::glue_cmd(&loaded, out)?,
        Command::BsDim => commands::bs_dim(&loaded, out)?,
        Command::Certify => commands::certify_cmd(&loaded, overrides, out)?,
        Command::Spectrum => commands::spectrum(&loaded, out)?,
    };
    match outcome.failure {
        None => Ok(outcome.summary),
        Some((stage, transcript)) => Err(CliError::Check { stage, transcript }),
    }
}
