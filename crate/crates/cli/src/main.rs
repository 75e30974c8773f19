//! Command-line experiment runner.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{parse_pair, parse_text, Command, Config, ConfigError};

/// Ultra-weak FOSLS Helmholtz experiments, written as CSV.
#[derive(Parser, Debug)]
#[command(version)]
struct Cli {
    command: Command,
    /// Flat `key = value` configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// `key=value` overrides applied after the file.
    overrides: Vec<String>,
}

fn configure(cli: &Cli) -> Result<Config, ConfigError> {
    let mut pairs = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            parse_text(&text)?
        }
        None => Vec::new(),
    };
    for o in &cli.overrides {
        pairs.push(parse_pair(o)?);
    }
    Config::build(cli.command, &pairs)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match configure(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: configuration: {e}");
            return ExitCode::from(2);
        }
    };
    match run::run(&cfg) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
