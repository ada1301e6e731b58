use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use topochain_cli::config::Overrides;
use topochain_cli::error::{CliError, Result};
use topochain_cli::{execute, load, load_preset, presets};

#[derive(Parser)]
#[command(
    name = "topochain",
    version,
    about = "Single-excitation qubit-chain simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bloch band energies on a momentum (and phase) grid.
    Bands(RunArgs),
    /// Winding number of a two-site chain, closed form and integral.
    Winding(RunArgs),
    /// Chern numbers over the momentum-phase torus.
    Chern(RunArgs),
    /// Single-excitation quench and its CED trace.
    Quench(RunArgs),
    /// Adiabatic pumping of cell eigenstates.
    Pump(RunArgs),
    /// Parameter sweep of another protocol.
    Sweep(RunArgs),
    /// Run a built-in config; lists the presets when no name is given.
    Preset {
        name: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CommonArgs {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Disorder seed; overrides the config and the environment.
    #[arg(long)]
    seed: Option<u64>,
    /// Integrator steps per pump cycle, or time intervals of a quench trace.
    #[arg(long)]
    steps: Option<usize>,
}

impl CommonArgs {
    fn overrides(&self) -> Result<Overrides> {
        Overrides {
            seed: self.seed,
            steps: self.steps,
            out: self.out.clone(),
            env_seed: None,
        }
        .with_env()
    }
}

fn run(cli: Cli) -> Result<()> {
    let (kind, args) = match &cli.command {
        Command::Bands(a) => ("bands", a),
        Command::Winding(a) => ("winding", a),
        Command::Chern(a) => ("chern", a),
        Command::Quench(a) => ("quench", a),
        Command::Pump(a) => ("pump", a),
        Command::Sweep(a) => ("sweep", a),
        Command::Preset { name: None, .. } => {
            for name in presets::NAMES {
                println!("{name}");
            }
            return Ok(());
        }
        Command::Preset {
            name: Some(name),
            common,
        } => {
            let cfg = load_preset(name, &common.overrides()?)?;
            return report(execute(&cfg));
        }
    };
    let text = fs::read_to_string(&args.config).map_err(|e| CliError::io(&args.config, e))?;
    let cfg = load(Some(kind), &text, &args.common.overrides()?)?;
    report(execute(&cfg))
}

fn report(result: Result<(PathBuf, topochain_cli::output::Artifacts)>) -> Result<()> {
    let (dir, artifacts) = result?;
    for w in &artifacts.summary.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
