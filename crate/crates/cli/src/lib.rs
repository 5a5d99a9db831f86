//! Command-line front end: parameter loading, subcommand dispatch and
//! artifact output with a hashed manifest.

use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod validate;

use commands::Command;
use config::RunConfig;
use error::{CliError, CliResult, EXIT_OK, EXIT_VALIDATION};
use output::Outputs;

#[derive(Debug, Parser)]
#[command(name = "enso-mz", version, about = "Delay-model reductions of the two-strip ENSO model")]
pub struct Cli {
    /// `default` or a JSON parameter file (see params.schema.json).
    #[arg(long, global = true, default_value = "default")]
    pub params: String,
    /// Parameter override `key=value`; keys may be written `params.key`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory. Without it the primary artifact is printed.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn config(&self) -> RunConfig {
        RunConfig {
            command: self.command.name().to_string(),
            params: self.params.clone(),
            overrides: self.overrides.clone(),
            out: self.out.clone(),
            deterministic: true,
            args: serde_json::to_value(&self.command).expect("arguments serialize"),
        }
    }
}

/// Runs the command and writes or prints its artifacts.
pub fn run(cli: &Cli) -> CliResult<Outputs> {
    let started = Instant::now();
    let config = cli.config();
    let params = config::load_params(&cli.params, &cli.overrides)?;
    log::info!("{} with inputs {}", config.command, output::inputs_hash(&config, &params));
    let outputs = cli.command.execute(&params)?;
    match &cli.out {
        Some(dir) => {
            output::write_dir(dir, &outputs, &config, &params, started.elapsed())?;
            for a in &outputs.artifacts {
                println!("{}", dir.join(&a.name).display());
            }
        }
        None => {
            if let Some(a) = outputs.artifacts.first() {
                use std::io::Write;
                std::io::stdout().write_all(&a.bytes)?;
            }
        }
    }
    Ok(outputs)
}

/// Exit status for a finished run.
pub fn exit_code(result: &CliResult<Outputs>) -> i32 {
    match result {
        Ok(o) if o.failure.is_some() => EXIT_VALIDATION,
        Ok(_) => EXIT_OK,
        Err(e) => e.exit_code(),
    }
}

pub fn report(result: &CliResult<Outputs>) {
    match result {
        Ok(Outputs { failure: Some(msg), .. }) => eprintln!("{}", CliError::Validation(msg.clone())),
        Err(e) => eprintln!("{e}"),
        Ok(_) => {}
    }
}
