//! `qdsps`: run single-photon-source scenarios from a TOML configuration and
//! write plot-ready CSV/JSON artifacts.

mod config;
mod error;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Config, DEFAULT_CONFIG};
use error::CliError;
use output::{write_report, Format, Provenance};
use scenario::Scenario;

#[derive(Parser)]
#[command(name = "qdsps", version, about = "Quantum-dot single-photon source simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML configuration overlaid on the built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `seed` from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `scenario` from the configuration.
    #[arg(long)]
    scenario: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its artifacts.
    Run {
        /// Scenario name (same as --scenario).
        name: Option<String>,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// List every precondition the configuration violates.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Check every scenario instead of the selected one.
        #[arg(long)]
        all: bool,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Print the built-in default configuration.
    Defaults,
}

fn resolve(common: &Common, positional: Option<&str>) -> Result<(Config, Scenario), CliError> {
    let mut cfg = match &common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(name) = common.scenario.as_deref().or(positional) {
        cfg.scenario = name.to_string();
    }
    let scenario = cfg.scenario.parse()?;
    Ok((cfg, scenario))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            name,
            common,
            out,
            format,
        } => {
            let (cfg, scenario) = resolve(&common, name.as_deref())?;
            let report = scenario::run(&cfg, scenario)?;
            let prov = Provenance::new(&cfg, scenario.name());
            for path in write_report(&out, &prov, &cfg, &report, format)? {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Validate { common, all, format } => {
            let (cfg, scenario) = resolve(&common, None)?;
            let scenarios = if all { Scenario::ALL.to_vec() } else { vec![scenario] };
            let violations: Vec<_> = scenarios
                .into_iter()
                .flat_map(|s| scenario::validate(&cfg, s))
                .fold(Vec::new(), |mut acc, v| {
                    if !acc.contains(&v) {
                        acc.push(v);
                    }
                    acc
                });
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&violations).expect("violations serialise")),
                Format::Csv => violations.iter().for_each(|v| println!("{v}")),
            }
            if violations.is_empty() {
                Ok(())
            } else {
                Err(CliError::Precondition(violations))
            }
        }
        Command::Defaults => {
            print!("{DEFAULT_CONFIG}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qdsps: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
