use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use bflow_cli::{parse_config, run, CliError, Command};
use clap::{Args, Parser, Subcommand};
use log::error;

#[derive(Parser)]
#[command(
    name = "bflow",
    version,
    about = "Dynamics on b-symplectic cotangent bundles"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Integrate each initial condition and write its trajectory.
    Simulate(RunArgs),
    /// Integrate a grid forward and backward and classify every orbit.
    Portrait(RunArgs),
    /// Integrate and classify each initial condition.
    Classify(RunArgs),
    /// Compare integrated trajectories with closed-form solutions.
    OracleCompare(RunArgs),
    /// Run the friction time rescaling and reconstruct real-time motion.
    Timescale(RunArgs),
    /// Test whether the dynamics can be a cotangent lift.
    Liftcheck(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reserved; recorded in the manifest.
    #[arg(long)]
    seed: Option<u64>,
}

impl Sub {
    fn split(self) -> (Command, RunArgs) {
        match self {
            Sub::Simulate(a) => (Command::Simulate, a),
            Sub::Portrait(a) => (Command::Portrait, a),
            Sub::Classify(a) => (Command::Classify, a),
            Sub::OracleCompare(a) => (Command::OracleCompare, a),
            Sub::Timescale(a) => (Command::Timescale, a),
            Sub::Liftcheck(a) => (Command::Liftcheck, a),
        }
    }
}

fn execute(command: Command, args: RunArgs) -> Result<u8, CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| CliError::io(&args.config, e))?;
    let config = parse_config(&text)?;
    if config.command != command {
        return Err(CliError::Config(format!(
            "configuration is for `{}` but `{command}` was requested",
            config.command
        )));
    }
    let out = args
        .out
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("bflow-out"));
    let report = run(&config, &text, &out, args.seed)?;
    if let Some(text) = &report.stdout {
        print!("{text}");
    }
    for r in report.records.iter().filter(|r| r.error.is_some()) {
        error!(
            "record {}: {}",
            r.index,
            r.error.as_deref().unwrap_or_default()
        );
    }
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BFLOW_LOG", "warn")).init();
    let (command, args) = Cli::parse().command.split();
    match execute(command, args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
