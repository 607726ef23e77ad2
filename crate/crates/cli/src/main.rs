//! `mfgset` command-line driver. Each run writes CSV tables, a JSON summary
//! and `<command>-manifest.json` into `--out-dir`.

mod context;
mod diffusion_cmd;
mod error;
mod game_cmd;
mod output;
mod population_cmd;
mod relaxed_cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::context::Ctx;
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(
    name = "mfgset",
    version,
    about = "Set values of finite mean field games"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Debug, Args)]
pub struct Common {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Comma-separated tolerances.
    #[arg(long, global = true, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Split time of the DPP checks; all splits when absent.
    #[arg(long, global = true)]
    pub t0: Option<usize>,
    /// Comma-separated population sizes.
    #[arg(long = "n-list", global = true, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// Monte Carlo samples per population size.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long = "out-dir", global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Points per action axis for games, grid nodes for diffusions.
    #[arg(long = "grid-resolution", global = true)]
    pub grid_resolution: Option<usize>,
}

#[derive(Clone, Debug, Args)]
pub struct ControlArgs {
    /// Grid action indices, time-major (`s * d + x` for state games, path
    /// nodes in order for path games); a single index means a constant.
    #[arg(long, value_delimiter = ',')]
    pub actions: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Args)]
pub struct LatticeArgs {
    /// Resolution of the relaxed-control lattice.
    #[arg(long, default_value_t = mfgset::relaxed::DEFAULT_LATTICE_RESOLUTION)]
    pub lattice: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a scenario against the model assumptions.
    Validate,
    /// Measure flow of a control.
    Flow(ControlArgs),
    /// Costs, values and equilibrium gaps of a control.
    Value(ControlArgs),
    /// Raw (eps = 0) or eps set value.
    Setvalue,
    /// Set-value DPP inclusions for state games.
    DppCheck,
    /// Relaxed controls and global measures.
    Relaxed {
        #[command(subcommand)]
        command: RelaxedCommand,
    },
    /// Homogeneous N-player games.
    Nplayer {
        #[command(subcommand)]
        command: NplayerCommand,
    },
    /// Heterogeneous N-player profiles built from relaxed equilibria.
    Hetero {
        #[command(subcommand)]
        command: HeteroCommand,
    },
    /// One-dimensional controlled diffusion.
    Diffusion {
        #[command(subcommand)]
        command: DiffusionCommand,
    },
    /// Two-state counterexample where path controls reach a value state
    /// controls cannot.
    Example71 {
        #[arg(long, default_value_t = 0.25)]
        a0: f64,
        /// Initial mass of the low state.
        #[arg(long = "mu-lo", default_value_t = 0.3)]
        mu_lo: f64,
    },
}

#[derive(Debug, Subcommand)]
pub enum RelaxedCommand {
    /// Lambda/gamma transforms on relaxed equilibria.
    Transforms(LatticeArgs),
    /// Relaxed, global and state set values coincide.
    Equivalence(LatticeArgs),
    /// Relaxed DPP inclusions.
    Dpp(LatticeArgs),
}

#[derive(Debug, Subcommand)]
pub enum NplayerCommand {
    /// Equilibrium gaps of a shared control at one population size.
    EqCheck {
        #[command(flatten)]
        control: ControlArgs,
        #[arg(long, default_value_t = 8)]
        n: usize,
    },
    /// eps-equilibrium values of the N-player game.
    SetValue {
        #[arg(long, default_value_t = 4)]
        n: usize,
    },
    /// Empirical-measure distances and equilibrium gaps over N.
    Converge(ControlArgs),
}

#[derive(Debug, Subcommand)]
pub enum HeteroCommand {
    /// Profile from a rounded global measure and its lifted gap.
    Lift {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long, default_value_t = 16)]
        n: usize,
    },
    /// Discretized relaxed control and rounding deviations.
    Discretize(LatticeArgs),
    /// Averaged N-player gaps of the constructed profiles.
    Converge(LatticeArgs),
}

#[derive(Debug, Subcommand)]
pub enum DiffusionCommand {
    /// Fokker-Planck flow of the scenario control.
    Flow,
    /// Feedback verification and Lipschitz probe.
    Hjb,
    /// Equilibria from several fixed-point seeds.
    MfeSearch,
    /// Particle-system convergence at a computed equilibrium.
    Converge,
}

fn run(cli: Cli) -> CliResult<PathBuf> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| error::input(e.to_string()))?;
    }
    let ctx = Ctx::new(cli.common)?;
    match cli.command {
        Command::Validate => game_cmd::validate(&ctx),
        Command::Flow(c) => game_cmd::flow(&ctx, &c),
        Command::Value(c) => game_cmd::value(&ctx, &c),
        Command::Setvalue => game_cmd::setvalue(&ctx),
        Command::DppCheck => game_cmd::dpp(&ctx),
        Command::Example71 { a0, mu_lo } => game_cmd::example71(&ctx, a0, mu_lo),
        Command::Relaxed { command } => relaxed_cmd::run(&ctx, command),
        Command::Nplayer { command } => population_cmd::nplayer(&ctx, command),
        Command::Hetero { command } => population_cmd::hetero(&ctx, command),
        Command::Diffusion { command } => diffusion_cmd::run(&ctx, command),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{}", summary.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
