use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rislab::experiment::{emit_outputs, load_config, run, ExperimentKind, Overrides};
use rislab::Error;

/// RIS-aided massive MIMO downlink with low-resolution DACs.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form against Monte Carlo sum rate over an (N, P) grid.
    Validate(Common),
    /// Optimized closed-form sum rate over an (N, P) grid.
    SweepPower(Common),
    /// Optimized CPS and DPS sum rate over the DAC resolution.
    SweepDacBits(Common),
    /// DPS sum rate over the RIS phase resolution.
    SweepRisBits(Common),
    /// Optimize the RIS phases of one scenario.
    Optimize(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials per grid point.
    #[arg(long)]
    trials: Option<usize>,
    /// Cap on PSO iterations.
    #[arg(long)]
    pso_budget: Option<usize>,
    /// Fixed random phases instead of PSO.
    #[arg(long)]
    fast: bool,
    /// User drops averaged per grid point.
    #[arg(long)]
    drops: Option<usize>,
}

fn execute(kind: ExperimentKind, c: Common) -> Result<(), Error> {
    let overrides = Overrides { seed: c.seed, trials: c.trials, pso_budget: c.pso_budget, fast: c.fast, drops: c.drops };
    let settings = load_config(c.config.as_deref(), kind, &overrides)?;
    log::info!("{kind}: {} grid points", settings.experiment.grid_len());
    let result = run(&settings)?;
    let files = emit_outputs(&result, &c.out)?;
    log::info!("wrote {} to {}", files.join(", "), c.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (kind, common) = match cli.command {
        Command::Validate(c) => (ExperimentKind::Validate, c),
        Command::SweepPower(c) => (ExperimentKind::SweepPower, c),
        Command::SweepDacBits(c) => (ExperimentKind::SweepDacBits, c),
        Command::SweepRisBits(c) => (ExperimentKind::SweepRisBits, c),
        Command::Optimize(c) => (ExperimentKind::Optimize, c),
    };
    match execute(kind, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.class(), e.to_string().replace('\n', " "));
            ExitCode::from(1)
        }
    }
}
