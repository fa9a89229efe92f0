use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use drough_cli::commands::{self, Run};
use drough_cli::config::{ExperimentConfig, DEFAULT_PRESET};
use drough_cli::CliError;

#[derive(Parser)]
#[command(name = "drough", version, about = "Delay rough PDE experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config file, or `preset:<name>`
    #[arg(long, global = true)]
    config: Option<String>,

    /// output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// driver seed, overriding the config
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the driver and store it in the DRPD1 format
    GenDriver,
    /// Run the structural checks and write a JSON report
    Validate,
    /// Solve the model and tabulate the solution norms
    Solve,
    /// Delay-to-zero convergence table
    Converge,
    /// Stability under perturbations of the inputs
    Stability,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot set up {n} threads: {e}")))?;
    }
    let mut config = match &cli.config {
        Some(spec) => ExperimentConfig::load(spec)?,
        None => ExperimentConfig::preset(DEFAULT_PRESET)?,
    };
    if let Some(seed) = cli.seed {
        config.driver.seed = seed;
    }
    let run = Run::new(config, cli.out);
    match cli.command {
        Command::GenDriver => commands::gen_driver(&run),
        Command::Validate => commands::validate(&run),
        Command::Solve => commands::solve(&run),
        Command::Converge => commands::converge(&run),
        Command::Stability => commands::stability(&run),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DROUGH_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("drough: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
