use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use gaugeweave::checks::Suite;

mod commands;
mod config;

use commands::{CliError, Run};
use config::RunConfig;

#[derive(Parser)]
#[command(name = "gaugeweave", version, about = "Berry connections, curvature and weak-value decompositions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomised checks (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Multiplies every tolerance (overrides the config).
    #[arg(long = "tol-scale", global = true)]
    tol_scale: Option<f64>,
    /// Which checks `suite` runs.
    #[arg(long, global = true, value_enum, default_value_t = SuiteArg::All)]
    suite: SuiteArg,
}

#[derive(Subcommand)]
enum Command {
    /// Berry connection on the grid or along the configured path.
    Connection,
    /// Berry phase along the configured path, by line integral and Wilson loop.
    Phase,
    /// Berry curvature; with a post-selection, also its weak-value split.
    Curvature,
    /// Split the connection into self and mutually projected parts.
    Decompose,
    /// Run a group of numerical checks and write a JSON report.
    Suite,
    /// Integrate the Schrodinger equation along a cone and extract phases.
    Evolve,
    /// Hard-wall well profiles and solenoid loop integrals.
    #[command(name = "ab-fig2")]
    AbFig2,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Gauge,
    Curvature,
    Ab,
    Adiabatic,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Gauge => Suite::Gauge,
            SuiteArg::Curvature => Suite::Curvature,
            SuiteArg::Ab => Suite::Ab,
            SuiteArg::Adiabatic => Suite::Adiabatic,
            SuiteArg::All => Suite::All,
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("GAUGEWEAVE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("GAUGEWEAVE_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(CliError::Usage)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.tol_scale {
        if !(s > 0.0) {
            return Err(CliError::Usage(format!("--tol-scale must be positive, got {s}")));
        }
    }
    let run = Run {
        out: commands::out_dir(cli.out.as_deref(), &cfg),
        seed: cli.seed.or(cfg.seed).unwrap_or(7),
        tol_scale: cli.tol_scale.unwrap_or(cfg.tolerances.scale),
        cfg,
    };
    match cli.command {
        Command::Connection => commands::connection(&run),
        Command::Phase => commands::phase(&run),
        Command::Curvature => commands::curvature(&run),
        Command::Decompose => commands::decompose_cmd(&run),
        Command::Suite => commands::suite(&run, cli.suite.into()),
        Command::Evolve => commands::evolve(&run),
        Command::AbFig2 => commands::ab_fig2(&run),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gaugeweave: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
