use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qfs_cli::stages::{self, Stage};
use qfs_cli::{CliError, RunConfig};

/// Quantum feature selection on a simulated Rydberg atom array.
#[derive(Parser)]
#[command(name = "qfs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Run directory holding the stage artifacts (overrides `output_dir`).
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Overrides `seeds.base_seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Load and encode the dataset -> table.json
    Ingest(Common),
    /// Relevance and redundancy estimates -> info.json
    Info(Common),
    /// Atom layout from the redundancy matrix -> layout.json
    Embed(Common),
    /// Drive schedules plus slew check -> program.json
    Program(Common),
    /// State-vector evolution and shot sampling -> samples.json
    Simulate(Common),
    /// Low-energy filtering and subset pruning -> selection.json
    Select(Common),
    /// Classifier comparison against MI ranking -> comparison.json
    Evaluate(Common),
    /// Every stage in order.
    All(Common),
    /// CSV series for plotting from an existing run directory.
    Plots(Common),
    /// Print the effective configuration as TOML.
    ShowConfig(Common),
}

fn config(common: &Common) -> Result<RunConfig, CliError> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(dir) = &common.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seeds.base_seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (stage, common) = match cli.command {
        Command::Ingest(c) => (Stage::Ingest, c),
        Command::Info(c) => (Stage::Info, c),
        Command::Embed(c) => (Stage::Embed, c),
        Command::Program(c) => (Stage::Program, c),
        Command::Simulate(c) => (Stage::Simulate, c),
        Command::Select(c) => (Stage::Select, c),
        Command::Evaluate(c) => (Stage::Evaluate, c),
        Command::All(c) => (Stage::All, c),
        Command::Plots(c) => {
            let dir = match (&c.output_dir, &c.config) {
                (Some(dir), _) => dir.clone(),
                (None, Some(_)) => config(&c)?.output_dir,
                (None, None) => return Err(CliError::Config("plots needs --output-dir or --config".into())),
            };
            for path in stages::emit_plots(&dir)? {
                eprintln!("plots: wrote {}", path.display());
            }
            return Ok(());
        }
        Command::ShowConfig(c) => {
            print!("{}", config(&c)?.to_toml());
            return Ok(());
        }
    };
    stages::run_stage(stage, &config(&common)?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
