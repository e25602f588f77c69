//! `sdna` command-line harness: rate reports, solver traces, epoch timing
//! and the sketch-equivalence check. Output is CSV/JSON for plotting
//! elsewhere.

mod commands;
mod config;
mod exit;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sdna::erm::ErmSolverKind;
use sdna::ihs::IhsFault;

use commands::Fixture;
use config::{ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(
    name = "sdna",
    version,
    about = "Curvature-aware randomized coordinate methods: rates, runs and timings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence rates and their ordering checks for a matrix.
    Rates(RatesCmd),
    /// Run SDNA / SDCA and write one trace CSV per (solver, tau, seed).
    Solve(RunCmd),
    /// Seconds per epoch for every (solver, tau).
    EpochTiming(RunCmd),
    /// Check SDNA against the iterative Hessian sketch update on least squares.
    IhsVerify(IhsCmd),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `out_dir`.
    #[arg(long, env = "SDNA_OUT_DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Minibatch size; repeat for a sweep.
    #[arg(long = "tau")]
    taus: Vec<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Sdna,
    Sdca,
}

impl From<SolverArg> for ErmSolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Sdna => ErmSolverKind::Sdna,
            SolverArg::Sdca => ErmSolverKind::Sdca,
        }
    }
}

#[derive(Args)]
struct RunCmd {
    #[command(flatten)]
    common: Common,
    /// Solver to run; repeat for several.
    #[arg(long = "solver", value_enum)]
    solvers: Vec<SolverArg>,
    /// Iteration budget in epochs.
    #[arg(long)]
    epochs: Option<f64>,
    /// Stop once the duality gap is at most this.
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Args)]
struct RatesCmd {
    #[arg(long, env = "SDNA_OUT_DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "near-singular")]
    fixture: Fixture,
    /// Symmetric positive definite matrix as a JSON array of rows; replaces the fixture.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Dimension of the identity and random fixtures.
    #[arg(long, default_value_t = 6)]
    n: usize,
    #[arg(long = "tau", default_values_t = [2])]
    taus: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Strong convexity of each separable term, for the proximal rates.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Also report the ERM rates, treating the matrix as `A^T A`.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    gamma_loss: f64,
    /// Estimate expected pseudoinverses from this many draws instead of enumerating.
    #[arg(long)]
    mc_samples: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    MissingInverseN,
}

#[derive(Args)]
struct IhsCmd {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 50)]
    steps: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Break the sketch update on purpose (for testing the check).
    #[arg(long, value_enum, hide = true)]
    inject_fault: Option<FaultArg>,
}

fn experiment(
    common: &Common,
    solvers: &[SolverArg],
    epochs: Option<f64>,
    eps: Option<f64>,
    base: fn() -> ExperimentConfig,
) -> anyhow::Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(Some(p))?,
        None => base(),
    };
    cfg.apply(&Overrides {
        seed: common.seed,
        taus: common.taus.clone(),
        solvers: solvers.iter().map(|&s| s.into()).collect(),
        epochs,
        eps,
    });
    cfg.validate()?;
    let out = commands::out_dir(common.out.as_deref(), cfg.out_dir.as_deref());
    Ok((cfg, out))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Rates(c) => {
            let args = commands::RatesArgs {
                fixture: c.fixture,
                matrix: c.matrix,
                n: c.n,
                taus: c.taus,
                seed: c.seed,
                gamma: c.gamma,
                lambda: c.lambda,
                gamma_loss: c.gamma_loss,
                mc_samples: c.mc_samples,
                out: commands::out_dir(c.out.as_deref(), None),
            };
            commands::rates(&args).map(drop)
        }
        Command::Solve(c) => {
            let (cfg, out) = experiment(
                &c.common,
                &c.solvers,
                c.epochs,
                c.eps,
                ExperimentConfig::default,
            )?;
            commands::solve(&cfg, &out).map(drop)
        }
        Command::EpochTiming(c) => {
            let (cfg, out) = experiment(
                &c.common,
                &c.solvers,
                c.epochs,
                c.eps,
                ExperimentConfig::default,
            )?;
            commands::epoch_timing(&cfg, &out).map(drop)
        }
        Command::IhsVerify(c) => {
            let (cfg, out) = experiment(&c.common, &[], None, None, commands::ihs_default_config)?;
            let fault = match c.inject_fault {
                Some(FaultArg::MissingInverseN) => IhsFault::MissingInverseN,
                None => IhsFault::None,
            };
            commands::ihs_verify(&cfg, c.steps, c.tol, fault, &out).map(drop)
        }
    }
}

fn main() -> ExitCode {
    let result = run(Cli::parse());
    if let Err(e) = &result {
        eprintln!("error: {e:#}");
    }
    ExitCode::from(commands::status(&result))
}
