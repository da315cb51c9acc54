//! `near`: expert generation, energy and policy training, evaluation and
//! probes for the maze imitation domain.

mod artifacts;
mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Context, ProbeKind};
use config::RunConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "near", version, about = "Energy-based annealed rewards for imitation on a 2-D maze")]
struct Cli {
    /// TOML run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory for all outputs.
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scripted expert demonstrations as a transition CSV.
    GenExpert,
    /// Noise-conditioned energy model by denoising score matching.
    TrainEnergy {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Policy optimization against a trained energy with annealing.
    TrainNear {
        #[arg(long)]
        energy: Option<PathBuf>,
    },
    /// Adversarial baseline.
    TrainAmp {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Trajectory metrics of a policy checkpoint, or of uniform random
    /// actions when `--policy` is omitted.
    Eval {
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        label: Option<String>,
    },
    /// Diagnostic probes.
    Probe {
        #[command(subcommand)]
        kind: ProbeKind,
    },
    /// Converts a lattice CSV into a binary PGM image.
    Grid2pgm { input: PathBuf, output: PathBuf },
}

fn load_config(cli: &Cli) -> Result<Context, CliError> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut config = RunConfig::from_toml(&text)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(Context { config, config_text: text, out: cli.out.clone() })
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Command::Grid2pgm { input, output } = &cli.command {
        let text = std::fs::read_to_string(input)?;
        std::fs::write(output, commands::grid_to_pgm(&text)?)?;
        return Ok(());
    }
    let ctx = load_config(cli)?;
    match &cli.command {
        Command::GenExpert => commands::gen_expert(&ctx),
        Command::TrainEnergy { data } => commands::train_energy_cmd(&ctx, data),
        Command::TrainNear { energy } => commands::train_near_cmd(&ctx, energy),
        Command::TrainAmp { data } => commands::train_amp_cmd(&ctx, data),
        Command::Eval { policy, data, label } => commands::eval_cmd(&ctx, policy, data, label),
        Command::Probe { kind } => commands::probe_cmd(&ctx, kind),
        Command::Grid2pgm { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
