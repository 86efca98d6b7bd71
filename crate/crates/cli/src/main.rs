use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use permimpact_cli::{run, CliError, Command, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "permimpact",
    version,
    about = "Nonlinear permanent market impact experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Simulate paths and ensemble statistics for one trajectory.
    Simulate(Args),
    /// Search round trips for expected profit.
    Arbitrage(Args),
    /// Generate a synthetic metaorder CSV.
    Generate(Args),
    /// Fit permanent and instantaneous impact from a metaorder CSV.
    Estimate(Args),
    /// Compare empirical and closed-form residual covariance.
    VerifyCovariance(Args),
}

#[derive(clap::Args)]
struct Args {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Replaces every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(command: Command, args: Args) -> Result<(), CliError> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.override_seed(seed);
    }
    let out = args
        .out
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set output_dir".into()))?;
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let base_dir = args.config.parent().map(PathBuf::from).unwrap_or_default();
    run(command, &config, &base_dir, &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Arbitrage(a) => (Command::Arbitrage, a),
        Sub::Generate(a) => (Command::Generate, a),
        Sub::Estimate(a) => (Command::Estimate, a),
        Sub::VerifyCovariance(a) => (Command::VerifyCovariance, a),
    };
    match execute(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("permimpact {}: {e}", command.name());
            e.exit_code()
        }
    }
}
