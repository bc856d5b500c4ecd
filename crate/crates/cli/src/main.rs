use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use pkm_forge::commands::{self, Criterion};
use pkm_forge::output::Artifacts;
use pkm_forge::{CliError, Overrides, RunConfig};

/// Workspace-grid design studies for three-axis translational manipulators.
///
/// Exit status: 0 success, 2 configuration error, 3 numerical failure,
/// 4 infeasible optimization, 1 output I/O failure. Set PKM_FORGE_LOG
/// (e.g. `info`, `debug`) for diagnostics on stderr.
#[derive(Debug, Parser)]
#[command(name = "pkm-forge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Criterion for grid-eval and cuboid.
    #[arg(long, global = true, value_enum)]
    criterion: Option<Criterion>,
    /// Output directory, overriding `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for multistart sampling, overriding `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid resolution N0, overriding `grid.resolution`.
    #[arg(long, global = true)]
    resolution: Option<u32>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a criterion on every grid node; writes the map CSV and mask.
    GridEval,
    /// Largest admissible cuboid for a criterion.
    Cuboid,
    /// Minimum translational stiffness and deflection at every node.
    StiffnessMap,
    /// Goal-attainment optimization.
    Optimize,
    /// Weighted sweep of the optimization problem, non-dominated points only.
    Pareto,
    /// Cuboids for every configured criterion plus the optimization result.
    Report,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads {n}: {e}")))?;
    }
    let path = cli.config.ok_or_else(|| CliError::Config("--config is required".into()))?;
    let overrides = Overrides { seed: cli.seed, resolution: cli.resolution, out: cli.out };
    let cfg = RunConfig::load(&path)?.with_overrides(&overrides)?;
    let criterion = || cli.criterion.ok_or_else(|| CliError::Config("--criterion is required".into()));
    let mut out = Artifacts::new(&cfg.output);
    let outcome = match cli.command {
        Command::GridEval => commands::grid_eval(&cfg, criterion()?, &mut out).map(drop),
        Command::Cuboid => commands::cuboid(&cfg, criterion()?, &mut out).map(drop),
        Command::StiffnessMap => commands::stiffness_map(&cfg, &mut out),
        Command::Optimize => commands::optimize(&cfg, &mut out).map(drop),
        Command::Pareto => commands::pareto(&cfg, &mut out).map(drop),
        Command::Report => commands::report(&cfg, &mut out).map(drop),
    };
    // Whatever was produced, including the best design of an infeasible
    // search, is written before the status is reported.
    for p in out.write_all()? {
        info!("wrote {}", p.display());
    }
    outcome
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PKM_FORGE_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pkm-forge: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
