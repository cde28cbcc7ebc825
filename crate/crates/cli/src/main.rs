use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod error;
mod output;

use error::CliError;
use levykin::harness::config::{RawConfig, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "levykin", version, about = "Kinetic transport with fat-tailed equilibria and its fractional limit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Run configuration: a file plus command-line overrides of any key.
#[derive(Args, Debug, Default, Clone)]
pub struct RunArgs {
    /// Configuration file (`key = value` lines, dotted keys)
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set grid.n=256`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Spatial and velocity dimension (key `N`)
    #[arg(long = "dim")]
    dim: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// ε, or a strictly decreasing comma-separated list
    #[arg(long)]
    epsilon: Option<String>,
    /// Torus side length (key `grid.L`)
    #[arg(long = "grid-length")]
    grid_length: Option<String>,
    /// Points per direction (key `grid.n`)
    #[arg(long = "grid-n")]
    grid_n: Option<String>,
    /// Final time (key `time.T`)
    #[arg(long = "t-final")]
    t_final: Option<String>,
    /// Time step (key `time.dt`)
    #[arg(long)]
    dt: Option<String>,
    /// Turning kernel: zero, simple, incoming, decay
    #[arg(long)]
    kernel: Option<String>,
    /// Field value c, one or two components
    #[arg(long, allow_hyphen_values = true)]
    c: Option<String>,
    /// Initial density: cosine, constant, bump
    #[arg(long)]
    init: Option<String>,
    #[arg(long, value_name = "PATH")]
    output: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Comma-separated snapshot times
    #[arg(long)]
    snapshots: Option<String>,
}

impl RunArgs {
    /// File values, then named flags, then `--set` overrides; validated.
    pub fn load(&self) -> Result<RunConfig, CliError> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::load(path)?,
            None => RawConfig::default(),
        };
        let named = [
            ("N", &self.dim),
            ("alpha", &self.alpha),
            ("epsilon", &self.epsilon),
            ("grid.L", &self.grid_length),
            ("grid.n", &self.grid_n),
            ("time.T", &self.t_final),
            ("time.dt", &self.dt),
            ("kernel.name", &self.kernel),
            ("c", &self.c),
            ("init.name", &self.init),
            ("output.path", &self.output),
            ("seed", &self.seed),
            ("snapshots", &self.snapshots),
        ];
        for (key, value) in named {
            if let Some(v) = value {
                raw.set(key, v)?;
            }
        }
        for assignment in &self.overrides {
            raw.set_override(assignment)?;
        }
        Ok(RunConfig::from_raw(&raw)?)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print γ, A, B and the fractional Laplacian normalization as CSV
    Constants(#[command(flatten)] RunArgs),
    /// Export the velocity quadrature of the equilibrium as CSV
    Equilibrium(#[command(flatten)] RunArgs),
    /// Evaluate the Fourier-Laplace symbol over the ε list
    Symbol {
        #[command(flatten)]
        run: RunArgs,
        /// Wave number (one or two components)
        #[arg(long, default_value = "1")]
        k: String,
        /// Laplace variable
        #[arg(long, default_value_t = 1.0)]
        p: f64,
    },
    /// Solve the kinetic equation; writes density snapshots and diagnostics
    SolveKinetic(#[command(flatten)] RunArgs),
    /// Solve the fractional advection-diffusion limit
    SolveMacro(#[command(flatten)] RunArgs),
    /// Monte Carlo velocity-jump process; requires --seed
    Particles {
        #[command(flatten)]
        run: RunArgs,
        /// Number of particles (key `particles.n`)
        #[arg(long = "n-particles")]
        n_particles: Option<String>,
        /// Histogram cells per direction
        #[arg(long, default_value_t = 64)]
        bins: usize,
    },
    /// ε-sweep of kinetic against macroscopic solutions; writes the report
    Sweep(#[command(flatten)] RunArgs),
    /// Run the acceptance suite; exits nonzero if any criterion fails
    Verify {
        #[arg(long)]
        seed: u64,
        /// Comma-separated criterion numbers (default: all)
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Constants(args) => commands::constants(&args.load()?).map(|_| true),
        Command::Equilibrium(args) => commands::equilibrium(&args.load()?).map(|_| true),
        Command::Symbol { run, k, p } => commands::symbol(&run.load()?, &k, p).map(|_| true),
        Command::SolveKinetic(args) => commands::solve_kinetic(&args.load()?).map(|_| true),
        Command::SolveMacro(args) => commands::solve_macro(&args.load()?).map(|_| true),
        Command::Particles { mut run, n_particles, bins } => {
            if let Some(n) = n_particles {
                run.overrides.insert(0, format!("particles.n={n}"));
            }
            commands::particles(&run.load()?, bins).map(|_| true)
        }
        Command::Sweep(args) => commands::sweep(&args.load()?),
        Command::Verify { seed, only } => Ok(commands::verify(seed, &only)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
