use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commcascade::experiment::{self, ExperimentConfig};
use commcascade::Result;

#[derive(Parser)]
#[command(
    name = "commcascade",
    version,
    about = "Threshold cascades on two-community random graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean-field fixed point and termination check.
    Meanfield(Flags),
    /// Replicated cascade simulation.
    Simulate(Flags),
    /// Integrate the ODE in the configured mode.
    Ode(Flags),
    /// Physical-time ODE overlaid with a simulation path.
    Evolve(Flags),
    /// Cartesian parameter sweep.
    Sweep(Flags),
    /// Contagion test and small-seed table.
    Contagion(Flags),
}

#[derive(Args)]
struct Flags {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    replications: Option<usize>,
}

impl Flags {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(eps) = self.eps {
            cfg.ode.eps = eps;
        }
        if let Some(step) = self.step {
            cfg.ode.step = step;
        }
        if let Some(r) = self.replications {
            cfg.replications = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Meanfield(f) => experiment::cmd_meanfield(&f.load()?).map(drop),
        Command::Simulate(f) => experiment::cmd_simulate(&f.load()?).map(drop),
        Command::Ode(f) => experiment::cmd_ode(&f.load()?).map(drop),
        Command::Evolve(f) => experiment::cmd_evolve(&f.load()?).map(drop),
        Command::Sweep(f) => experiment::cmd_sweep(&f.load()?).map(drop),
        Command::Contagion(f) => experiment::cmd_contagion(&f.load()?).map(drop),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
