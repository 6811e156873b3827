use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tamed_spde_cli::config::{self, Overrides, Study};
use tamed_spde_cli::run::{self, Outcome};

/// Tamed Euler-Galerkin studies for stochastic evolution equations.
///
/// Exit status: 0 when every in-study assertion passed, 1 on an assertion
/// failure (artifacts preserved next to a FAILED marker), 2 on configuration
/// or usage errors.
#[derive(Parser)]
#[command(name = "tamed-spde", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Key-value configuration file (`section.key = value` lines).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Base seed for the counter-based noise generator.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Monte Carlo sample count.
    #[arg(long, global = true, value_name = "N")]
    samples: Option<usize>,

    /// Worker thread count (beats the WORKERS environment variable).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Output directory for reports (default: ./reports).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Run schemes outside the c(m) * tau < epsilon stability region.
    #[arg(long, global = true)]
    override_stability_guard: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Integrate one trajectory and dump its snapshots.
    Simulate,
    /// A priori moment bounds along a refinement schedule.
    Moments,
    /// Strong error against an embedded fine reference.
    Converge,
    /// Time-step gap rate study.
    Gap,
    /// Tamed-versus-untamed divergence contrast on the scalar toy model.
    Diverge,
    /// Structural assumption checkers on the configured model.
    Check,
    /// Print a refinement schedule with both Galerkin constant forms.
    Schedule,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let study = match cli.command {
        Command::Simulate => Study::Simulate,
        Command::Moments => Study::Moments,
        Command::Converge => Study::Converge,
        Command::Gap => Study::Gap,
        Command::Diverge => Study::Diverge,
        Command::Check => Study::Check,
        Command::Schedule => Study::Schedule,
    };

    let text = match &cli.config {
        None => None,
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => Some(t),
            Err(e) => {
                eprintln!("config error: cannot read {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
    };

    let overrides = Overrides {
        seed: cli.seed,
        samples: cli.samples,
        workers: cli.workers,
        workers_env: std::env::var("WORKERS").ok(),
        out: cli.out,
        override_guard: cli.override_stability_guard,
    };

    let cfg = match config::build(study, text.as_deref(), &overrides) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("config error: {msg}");
            return ExitCode::from(2);
        }
    };

    match run::run(&cfg) {
        Ok(Outcome::Passed) => {
            println!("{}: PASSED (reports in {})", cfg.study.name(), cfg.out.display());
            ExitCode::SUCCESS
        }
        Ok(Outcome::Failed(msg)) => {
            eprintln!("{}: FAILED - {msg}", cfg.study.name());
            ExitCode::from(1)
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
