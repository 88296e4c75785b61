use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use irlc::commands::{self, CommandOutcome, RunOptions};
use irlc::config::LoadedConfig;
use irlc::{CliError, CliResult};

/// Reward-compatibility experiments for inverse reinforcement learning.
#[derive(Debug, Parser)]
#[command(name = "irlc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Explore, then classify every reward of the configured set.
    Classify(RunArgs),
    /// Error-versus-budget study with fitted log-log slopes.
    Rates(RunArgs),
    /// Fixed-budget runs on tree or packing instances.
    Hardness(RunArgs),
    /// Separating-hyperplane certificates with a grid cross-check.
    Degeneracy(RunArgs),
    /// Write the configured instance (and expert demonstrations) to disk.
    GenInstance(RunArgs),
    /// Check an instance file and optionally a JSONL episode file.
    Validate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        episodes: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output.dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Compute exact ground-truth columns (default).
    #[arg(long, overrides_with = "no_oracle")]
    oracle: bool,
    #[arg(long)]
    no_oracle: bool,
}

fn prepare(args: &RunArgs) -> CliResult<(LoadedConfig, RunOptions)> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let loaded = LoadedConfig::read(&args.config)?;
    let out_dir = args
        .out_dir
        .clone()
        .unwrap_or_else(|| loaded.resolve(&loaded.config.output.dir));
    let oracle = !args.no_oracle || args.oracle;
    Ok((loaded, RunOptions { out_dir, oracle }))
}

fn run(cli: Cli) -> CliResult<CommandOutcome> {
    let with = |args: &RunArgs, f: fn(&LoadedConfig, &RunOptions) -> CliResult<CommandOutcome>| {
        let (loaded, opts) = prepare(args)?;
        f(&loaded, &opts)
    };
    match &cli.command {
        Command::Classify(a) => with(a, commands::cmd_classify),
        Command::Rates(a) => with(a, commands::cmd_rates),
        Command::Hardness(a) => with(a, commands::cmd_hardness),
        Command::Degeneracy(a) => with(a, commands::cmd_degeneracy),
        Command::GenInstance(a) => with(a, commands::cmd_gen_instance),
        Command::Validate { instance, episodes } => {
            commands::cmd_validate(instance, episodes.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&outcome.summary).expect("serializable")
            );
            for f in &outcome.flags {
                eprintln!("flag: {f}");
            }
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
