//! `boxcycle` command-line driver.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::Config;
use output::Outputs;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] boxcycle::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use boxcycle::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e.root() {
                E::InvalidArgument(_) => 2,
                E::ResourceLimit(_) => 4,
                _ => 3,
            },
            CliError::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "boxcycle",
    version,
    about = "Spectral flow and holonomy of bosons in a box with a moving delta wall"
)]
struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, short, global = true, default_value = ".")]
    out: PathBuf,
    /// Record wall-clock timings in the manifest.
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct ManyBodyArgs {
    #[arg(long)]
    particles: Option<usize>,
    /// Highest single-particle level in the basis.
    #[arg(long)]
    cutoff: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Fock states such as 1-1-3, comma separated.
    #[arg(long, value_delimiter = ',')]
    states: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single-particle levels at the configured wall.
    Spectrum {
        #[arg(long = "M")]
        m: Option<usize>,
    },
    /// Tracked single-particle threads around the cycle.
    Flow {
        #[arg(long = "M")]
        m: Option<usize>,
    },
    /// Level permutation after one cycle, or the Fock-state map with --particles.
    Holonomy {
        #[arg(long = "M")]
        m: Option<usize>,
        #[arg(long)]
        mode: Option<String>,
        #[command(flatten)]
        body: ManyBodyArgs,
    },
    /// Noninteracting Fock-thread energies with first-order shifts.
    FockFlow {
        #[command(flatten)]
        body: ManyBodyArgs,
    },
    /// Classified crossings among Fock threads.
    Gaps {
        #[command(flatten)]
        body: ManyBodyArgs,
    },
    /// Interaction matrix over the Fock basis at the configured wall.
    Matrix {
        #[command(flatten)]
        body: ManyBodyArgs,
    },
    /// Landau-Zener closed form against two-level integration.
    Lz {
        #[arg(long, value_delimiter = ',')]
        gammas: Vec<f64>,
        /// Half-width of the sweep window in units of gap / slope.
        #[arg(long, default_value_t = 100.0)]
        window: f64,
    },
    /// Time-dependent cycle in the instantaneous Fock eigenbasis.
    Sweep {
        #[command(flatten)]
        body: ManyBodyArgs,
        #[arg(long = "T")]
        total_time: Option<f64>,
    },
    /// One particle on a grid with a Gaussian wall.
    Propagate {
        #[arg(long = "T")]
        total_time: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        modes: Option<usize>,
    },
    /// Data table for figure 2, 3, 4 or 5.
    ReproduceFigure { number: usize },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum { .. } => "spectrum",
            Command::Flow { .. } => "flow",
            Command::Holonomy { .. } => "holonomy",
            Command::FockFlow { .. } => "fock-flow",
            Command::Gaps { .. } => "gaps",
            Command::Matrix { .. } => "matrix",
            Command::Lz { .. } => "lz",
            Command::Sweep { .. } => "sweep",
            Command::Propagate { .. } => "propagate",
            Command::ReproduceFigure { .. } => "reproduce-figure",
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("HOLONOMY_BOX_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Config(format!(
            "HOLONOMY_BOX_THREADS must be a positive integer, got {v:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size the thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let start = Instant::now();
    configure_threads()?;
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    for s in &cli.set {
        cfg.apply_override(s)?;
    }
    let mut out = Outputs::new(&cli.out)?;
    let name = cli.command.name();
    commands::execute(cli.command, &mut cfg, &mut out)?;
    let elapsed = cli.timings.then(|| start.elapsed().as_secs_f64());
    out.write_manifest(name, &cfg.snapshot()?, elapsed)?;
    for entry in out.entries() {
        println!("{}", cli.out.join(&entry.path).display());
    }
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
