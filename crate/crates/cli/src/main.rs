use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;
use relcrawl_cli::commands::{self, Outcome};
use relcrawl_cli::config::{ExperimentConfig, ProfileKind};
use relcrawl_cli::CliError;

#[derive(Parser)]
#[command(name = "relcrawl", version, about = "Soft crawler experiments: equilibria, gaits and strides")]
struct Cli {
    /// TOML experiment file; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Forcing amplitude (overrides the file).
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Output directory (overrides the file).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized runs (overrides the file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also write gnuplot data and a plot template.
    #[arg(long, global = true)]
    emit_plots: bool,
    /// Ground-contact smoothing profile (overrides the file).
    #[arg(long, global = true, value_enum)]
    profile: Option<ProfileKind>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find the standing equilibrium and certify its stability.
    Certify,
    /// Settle at rest, then force and record the trajectory.
    Simulate,
    /// Converge the periodic gait at one amplitude.
    Cycle,
    /// Stride against amplitude with local scaling exponents.
    Sweep,
    /// Small-amplitude stride coefficients against a nonlinear cycle.
    Perturbation,
    /// Turning gait of the four-mass crawler.
    Demo3d,
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(e) = cli.epsilon {
        cfg.epsilon = e;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = cli.profile {
        cfg.profile = p;
    }
    std::fs::create_dir_all(&cfg.out)?;
    let out = cfg.out.clone();
    match cli.command {
        Command::Certify => commands::certify(&cfg, &out),
        Command::Simulate => commands::simulate(&cfg, &out, cli.emit_plots),
        Command::Cycle => commands::cycle(&cfg, &out),
        Command::Sweep => commands::sweep(&cfg, &out, cli.emit_plots),
        Command::Perturbation => commands::perturbation(&cfg, &out),
        Command::Demo3d => commands::demo3d(&cfg, &out, cli.emit_plots),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(o) => {
            println!("{}", o.summary);
            ExitCode::from(o.code)
        }
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
