//! Experiment command line: executes padded plans with a leakage ledger,
//! evaluates the privacy metric and the attacker simulation, and writes
//! machine-readable CSV/JSON outputs. Every command is a pure function of
//! (config, seed) — byte-identical outputs modulo bench timings.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use commands::{CliError, CommonArgs, Outputs};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "obqsim",
    about = "Oblivious query simulator with controlled size disclosure",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct SharedArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for result files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Input CSV files carry a header row.
    #[arg(long)]
    header: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a plan; write result, ledger and stats.
    Run {
        #[command(flatten)]
        shared: SharedArgs,
        /// Global seed (mandatory: runs must be reproducible).
        #[arg(long)]
        seed: u64,
    },
    /// Rounds-to-Recover per operator (or per sweep point); write rtr.csv.
    Rtr {
        #[command(flatten)]
        shared: SharedArgs,
        #[arg(long)]
        seed: u64,
    },
    /// Empirical-vs-analytic attacker comparison; write attack.csv.
    Attack {
        #[command(flatten)]
        shared: SharedArgs,
        #[arg(long)]
        seed: u64,
        /// Override the configured trial count.
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Tuple-count cost sweep over filler fractions; write cost.csv.
    Cost {
        #[command(flatten)]
        shared: SharedArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate synthetic tables and the generation report.
    GenData {
        #[command(flatten)]
        shared: SharedArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Resize wall-time scaling rows; write bench.csv and bench_fit.csv.
    Bench {
        #[command(flatten)]
        shared: SharedArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(command: &Command) -> Result<(), CliError> {
    let (shared, seed, trials) = match command {
        Command::Run { shared, seed } => (shared, *seed, None),
        Command::Rtr { shared, seed } => (shared, *seed, None),
        Command::Attack {
            shared,
            seed,
            trials,
        } => (shared, *seed, *trials),
        Command::Cost { shared, seed } => (shared, *seed, None),
        Command::GenData { shared, seed } => (shared, *seed, None),
        Command::Bench { shared, seed } => (shared, *seed, None),
    };

    let config = config::load_config(&shared.config).map_err(CliError::Config)?;
    let config_dir = shared
        .config
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let args = CommonArgs {
        seed,
        trials_override: trials,
        csv_has_header: shared.header,
        config_dir: &config_dir,
    };

    let outputs = match command {
        Command::Run { .. } => commands::cmd_run(&config, &args)?,
        Command::Rtr { .. } => commands::cmd_rtr(&config, &args)?,
        Command::Attack { .. } => commands::cmd_attack(&config, &args)?,
        Command::Cost { .. } => commands::cmd_cost(&config, &args)?,
        Command::GenData { .. } => commands::cmd_gen_data(&config, &args)?,
        Command::Bench { .. } => commands::cmd_bench(&config, &args)?,
    };

    write_outputs(&shared.out, outputs)
}

fn write_outputs(dir: &Path, outputs: Outputs) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create `{}`: {e}", dir.display())))?;
    for (name, bytes) in outputs {
        let path = dir.join(&name);
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::Runtime(format!("cannot write `{}`: {e}", path.display())))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
