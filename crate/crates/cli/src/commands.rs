use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use serde::Serialize;

use sdna::data::{SyntheticConfig, TargetKind};
use sdna::erm::{epoch_seconds, run_erm, ErmProblem, ErmRunOptions, ErmSolver, ErmSolverKind};
use sdna::fixtures;
use sdna::ihs::{verify_ihs_equivalence, IhsFault, IhsReport};
use sdna::rates::{ErmInputs, RateInputs, RateReport};
use sdna::sampling::seeded_rng;
use sdna::{Error, LossKind, PseudoinverseMode, SamplingSpec, SymmetricMatrix};

use crate::config::{DatasetSource, ExperimentConfig};
use crate::exit::{self, CheckFailed, ConfigError};
use crate::output;

pub const DEFAULT_OUT_DIR: &str = "sdna-out";
/// Used when exact enumeration of the sampling is too large and no
/// sample count was given.
pub const FALLBACK_MC_SAMPLES: usize = 20_000;

pub fn out_dir(flag: Option<&Path>, cfg: Option<&Path>) -> PathBuf {
    flag.or(cfg)
        .unwrap_or(Path::new(DEFAULT_OUT_DIR))
        .to_path_buf()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Fixture {
    /// The strongly correlated 3x3 example.
    NearSingular,
    Identity,
    /// `B B^T + 0.1 I` from `--seed`.
    Random,
}

pub struct RatesArgs {
    pub fixture: Fixture,
    pub matrix: Option<PathBuf>,
    pub n: usize,
    pub taus: Vec<usize>,
    pub seed: u64,
    pub gamma: f64,
    pub lambda: Option<f64>,
    pub gamma_loss: f64,
    pub mc_samples: Option<usize>,
    pub out: PathBuf,
}

fn load_matrix(path: &Path) -> anyhow::Result<SymmetricMatrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let rows: Vec<Vec<f64>> =
        serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    SymmetricMatrix::from_rows(&rows)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())).into())
}

pub fn rates(args: &RatesArgs) -> anyhow::Result<Vec<RateReport>> {
    let (m, context) = match &args.matrix {
        Some(p) => (load_matrix(p)?, format!("matrix {}", p.display())),
        None => match args.fixture {
            Fixture::NearSingular => (fixtures::near_singular_3x3(), "near_singular".to_string()),
            Fixture::Identity => (
                SymmetricMatrix::identity(args.n),
                format!("identity n={}", args.n),
            ),
            Fixture::Random => (
                fixtures::random_pd(args.n, args.seed),
                format!("random n={} seed={}", args.n, args.seed),
            ),
        },
    };
    let n = m.dim();
    if let Some(&t) = args.taus.iter().find(|&&t| t == 0 || t > n) {
        return Err(ConfigError(format!("tau {t} is outside [1, {n}]")).into());
    }
    let mut reports = Vec::new();
    for &tau in &args.taus {
        let spec = SamplingSpec::tau_nice(n, tau)?;
        let mode = match args.mc_samples {
            Some(samples) => PseudoinverseMode::MonteCarlo {
                samples,
                seed: args.seed,
            },
            None => PseudoinverseMode::ExactEnumeration,
        };
        let inputs = |mode| RateInputs {
            context: context.clone(),
            m: &m,
            g: &m,
            gamma: vec![args.gamma; n],
            v: None,
            spec: &spec,
            mode,
            erm: args.lambda.map(|lambda| ErmInputs {
                gram: &m,
                lambda,
                gamma_loss: args.gamma_loss,
            }),
        };
        let report = match RateReport::compute(inputs(mode)) {
            Err(Error::EnumerationCapacity { .. }) => {
                eprintln!("tau={tau}: support too large to enumerate, using {FALLBACK_MC_SAMPLES} Monte Carlo samples");
                RateReport::compute(inputs(PseudoinverseMode::MonteCarlo {
                    samples: FALLBACK_MC_SAMPLES,
                    seed: args.seed,
                }))?
            }
            other => other?,
        };
        reports.push(report);
    }
    let json = serde_json::to_string_pretty(&reports)?;
    output::write_atomic(&args.out.join("rates.json"), json.as_bytes())?;
    println!("{json}");
    Ok(reports)
}

fn prepare_all(
    cfg: &ExperimentConfig,
    problem: &ErmProblem,
) -> anyhow::Result<Vec<(usize, SamplingSpec, ErmSolver)>> {
    let mut prepared = Vec::new();
    for &tau in &cfg.taus {
        let spec = SamplingSpec::tau_nice(problem.n(), tau)?;
        for &kind in &cfg.solvers {
            prepared.push((tau, spec.clone(), ErmSolver::prepare(kind, problem, &spec)?));
        }
    }
    Ok(prepared)
}

/// Runs every (solver, tau, seed) cell in parallel and writes one CSV per
/// cell. Returns the written paths in cell order.
pub fn solve(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let problem = cfg.build_problem()?;
    let prepared = prepare_all(cfg, &problem)?;
    let cells: Vec<_> = prepared
        .iter()
        .flat_map(|p| cfg.seeds.iter().map(move |&seed| (p, seed)))
        .collect();
    let results: Vec<anyhow::Result<PathBuf>> = cells
        .par_iter()
        .map(|((tau, spec, solver), seed)| {
            let mut opts = ErmRunOptions::from_epochs(
                cfg.epochs,
                cfg.checkpoint_epochs,
                problem.n(),
                *tau as f64,
                *seed,
            );
            opts.eps = cfg.eps;
            let name = output::trace_file_name(solver.kind().name(), *tau, *seed);
            let trace = run_erm(solver, &problem, spec, &opts, &mut seeded_rng(*seed))
                .with_context(|| format!("{} tau={tau} seed={seed}", solver.kind().name()))?;
            let path = out.join(&name);
            output::write_atomic(&path, &output::trace_csv(&trace)?)?;
            match trace.last() {
                Some(r) => println!(
                    "{name}: {} rows, epoch {:.2}, gap {:.3e}",
                    trace.len(),
                    r.epoch,
                    r.gap
                ),
                None => println!("{name}: no iterations"),
            }
            Ok(path)
        })
        .collect();

    let mut paths = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(p) => paths.push(p),
            Err(e) => {
                eprintln!("error: {e:#}");
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(paths),
    }
}

/// Median seconds per epoch for every (solver, tau), run one cell at a
/// time so cells do not compete for cores.
pub fn epoch_timing(
    cfg: &ExperimentConfig,
    out: &Path,
) -> anyhow::Result<Vec<(usize, ErmSolverKind, f64)>> {
    let problem = cfg.build_problem()?;
    let seed = cfg.seeds[0];
    let mut rows = Vec::new();
    for (tau, spec, solver) in prepare_all(cfg, &problem)? {
        let secs = epoch_seconds(
            &solver,
            &problem,
            &spec,
            cfg.timing_epochs,
            cfg.timing_reps,
            &mut seeded_rng(seed),
        )?;
        rows.push((tau, solver.kind(), secs));
    }
    let named: Vec<_> = rows.iter().map(|&(t, k, s)| (t, k.name(), s)).collect();
    let csv = output::timing_csv(&named)?;
    output::write_atomic(&out.join("epoch_timing.csv"), &csv)?;
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(rows)
}

pub fn ihs_default_config() -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSource::Synthetic(SyntheticConfig {
            d: 16,
            n: 64,
            seed: 1,
            density: 1.0,
            label_noise: 0.1,
            target: TargetKind::Regression,
        }),
        taus: vec![4],
        ..ExperimentConfig::default()
    }
}

#[derive(Debug, Serialize)]
pub struct IhsOutput {
    pub tau: usize,
    pub seed: u64,
    pub tol: f64,
    pub fault: IhsFault,
    #[serde(flatten)]
    pub report: IhsReport,
}

pub fn ihs_verify(
    cfg: &ExperimentConfig,
    steps: usize,
    tol: f64,
    fault: IhsFault,
    out: &Path,
) -> anyhow::Result<IhsOutput> {
    if cfg.loss != LossKind::Quadratic {
        return Err(ConfigError("ihs-verify needs the quadratic loss".into()).into());
    }
    if !(tol > 0.0) {
        return Err(ConfigError("tol must be positive".into()).into());
    }
    let problem = cfg.build_problem()?;
    let tau = cfg.taus[0];
    let seed = cfg.seeds[0];
    let spec = SamplingSpec::tau_nice(problem.n(), tau)?;
    let report = verify_ihs_equivalence(&problem, &spec, steps, &mut seeded_rng(seed), tol, fault)?;
    let result = IhsOutput {
        tau,
        seed,
        tol,
        fault,
        report,
    };
    let json = serde_json::to_string_pretty(&result)?;
    output::write_atomic(&out.join("ihs_report.json"), json.as_bytes())?;
    println!("{json}");
    if !result.report.pass {
        let step = result.report.first_failing_step.unwrap_or(0);
        return Err(CheckFailed(format!(
            "sketch update disagrees with SDNA at step {step} (max discrepancy {:e})",
            result.report.max_discrepancy
        ))
        .into());
    }
    Ok(result)
}

/// Exit status for a command result.
pub fn status(result: &anyhow::Result<impl Sized>) -> u8 {
    match result {
        Ok(_) => 0,
        Err(e) => exit::code_for(e),
    }
}
