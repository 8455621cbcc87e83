use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use protective_cli::{parse_config, run_experiment, CliError};

#[derive(Parser, Debug)]
#[command(name = "protective", version, about = "Protective measurement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment and write <stem>.json and <stem>.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for sweeps and ensembles (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides the output directory in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a config and print it with all defaults filled in.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &PathBuf) -> Result<protective_cli::ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            seed,
            threads,
            out,
        } => {
            let mut cfg = load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(k) = threads {
                if k == 0 {
                    return Err(CliError::Config("--threads must be >= 1".to_string()));
                }
                rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build_global()
                    .map_err(|e| CliError::Config(e.to_string()))?;
            }
            let (json, csv) = run_experiment(&cfg, out.as_deref())?;
            println!("{}", json.display());
            println!("{}", csv.display());
            Ok(())
        }
        Command::Check { config } => {
            let cfg = load(&config)?;
            let text = serde_json::to_string_pretty(&cfg).map_err(|e| CliError::Io(e.to_string()))?;
            println!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
