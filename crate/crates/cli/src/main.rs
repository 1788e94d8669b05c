//! `scanmpc` — command-line front end for the trajectory optimizer.
//!
//! Subcommands:
//! * `verify`   — cross-checking suites: solver backends against the dense
//!   KKT oracle, scan-operator algebra, tree depth, barrier smoothness, and
//!   model Jacobians against finite differences. Exit 1 if any suite fails.
//! * `solve`    — cold-start solve of the configured problem; one CSV row
//!   per SQP iterate.
//! * `simulate` — closed-loop receding-horizon run of the configured robot
//!   scenario; one CSV row per robot per control step.
//! * `bench`    — timing sweeps over horizon, robot count, and batch size.
//! * `batch`    — independent perturbed solves of the configured problem,
//!   dispatched over the worker pool; one CSV row per instance.
//!
//! Exit codes: 0 success, 1 runtime or verification failure, 2 bad config.
//! CSV files written by `verify`, `solve`, `simulate`, and `batch` contain
//! no wall-clock fields, so a fixed seed reproduces them byte for byte.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scanmpc::config::RunConfig;
use scanmpc::Error;

mod cmds;
mod verify;

#[derive(Parser)]
#[command(
    name = "scanmpc",
    version,
    about = "Multiple-shooting SQP trajectory optimizer with sequential and scan-parallel LQR backends"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. Command-line values override the
/// corresponding config-file fields.
#[derive(Args)]
struct Common {
    /// JSON run configuration; see the configs/ directory for samples.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// LQR backend: riccati (alias sequential), scan, or scan-seq.
    #[arg(long, value_name = "NAME")]
    backend: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long, value_name = "COUNT")]
    workers: Option<usize>,
    /// RNG seed for instance perturbations and verification draws.
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
    /// Write CSV output to this path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the cross-checking suites and print a pass/fail table.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Deliberately corrupt the value-combine operator; verification
        /// must then fail. Negative control for the suites themselves.
        #[arg(long, hide = true)]
        corrupt_combine: bool,
    },
    /// Solve the configured problem from a cold start.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Run the configured closed-loop robot scenario.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Time the solver across horizon, robot-count, and batch sweeps.
    Bench {
        #[command(flatten)]
        common: Common,
    },
    /// Solve independent perturbed instances of the configured problem.
    Batch {
        #[command(flatten)]
        common: Common,
    },
}

/// Stand-in configuration for commands that can run without --config
/// (`verify` ignores the model entirely; `bench` builds its own problems).
const DEFAULT_CONFIG: &str = r#"{"model": {"double_integrator":
    {"horizon": 50, "dt": 0.05, "x0": [1.0, 0.0, -0.5, 0.25], "goal": [0.0, 0.0, 0.0, 0.0]}}}"#;

impl Common {
    fn load(&self, config_required: bool) -> scanmpc::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::Config(format!("cannot read config {}: {e}", path.display()))
                })?;
                RunConfig::from_json(&text)?
            }
            None if config_required => {
                return Err(Error::Config("this command needs --config <path>".into()));
            }
            None => RunConfig::from_json(DEFAULT_CONFIG).expect("built-in default config"),
        };
        if let Some(b) = &self.backend {
            cfg.backend = b.clone();
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.backend()?; // reject a bad backend name before any work starts
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                _ => 1,
            })
        }
    }
}

/// Ok(true) = clean run, Ok(false) = the command itself reports failure
/// (failed suite, unconverged solve), Err = could not run at all.
fn run(cli: &Cli) -> scanmpc::Result<bool> {
    match &cli.command {
        Command::Verify { common, corrupt_combine } => {
            let cfg = common.load(false)?;
            verify::run(&cfg, *corrupt_combine, common.out.as_deref())
        }
        Command::Solve { common } => {
            let cfg = common.load(true)?;
            cmds::solve_cmd(&cfg, common.out.as_deref())
        }
        Command::Simulate { common } => {
            let cfg = common.load(true)?;
            cmds::simulate_cmd(&cfg, common.out.as_deref())
        }
        Command::Bench { common } => {
            let cfg = common.load(false)?;
            cmds::bench_cmd(&cfg, common.backend.as_deref(), common.out.as_deref())
        }
        Command::Batch { common } => {
            let cfg = common.load(true)?;
            cmds::batch_cmd(&cfg, common.out.as_deref())
        }
    }
}
