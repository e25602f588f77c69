//! L2-regularized empirical risk minimization in the dual: SDNA and
//! minibatch SDCA.
//!
//! Primal `P(w) = (1/n) sum_i phi_i(a_i^T w) + (lambda/2) |w|^2`, dual
//! `D(alpha) = (1/n) sum_i -phi_i*(-alpha_i) - (lambda/2) |A alpha / (lambda n)|^2`.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::composite::{scalar_prox, solve_block, CoordinateTerm};
use crate::data::{RawDataset, SparseColumns};
use crate::error::{Error, Result};
use crate::linalg::{self, Subset, SymmetricMatrix};
use crate::loss::LossKind;
use crate::sampling::{EsoStrategy, SamplingSpec};

/// Allowed `|alpha_bar - A alpha / (lambda n)|_inf` at checkpoints.
pub const DRIFT_TOL: f64 = 1e-9;
/// Largest `n` for which `A^T A` may be precomputed.
pub const MAX_PRECOMPUTED_GRAM_N: usize = 4096;
/// Largest `n` for which the SDCA ESO vector is certified by an eigensolve;
/// beyond it the sparsity-based bound is used.
pub const CERTIFIED_ESO_MAX_N: usize = 2048;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GramStrategy {
    /// Form each block `A_S^T A_S` from the columns when it is needed.
    #[default]
    OnTheFly,
    /// Form `A^T A` once; requires `n <= MAX_PRECOMPUTED_GRAM_N`.
    Precompute,
}

#[derive(Clone, Debug)]
pub struct ErmProblem {
    a: SparseColumns,
    b: Vec<f64>,
    loss: LossKind,
    lambda: f64,
    gram: Option<SymmetricMatrix>,
}

impl ErmProblem {
    pub fn new(
        data: RawDataset,
        loss: LossKind,
        lambda: f64,
        strategy: GramStrategy,
    ) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        let (a, b) = data.into_parts();
        for &bi in &b {
            loss.check_label(bi)?;
        }
        if a.rows() == 0 {
            return Err(Error::Dataset("feature dimension is zero".into()));
        }
        if strategy == GramStrategy::Precompute && a.cols() > MAX_PRECOMPUTED_GRAM_N {
            return Err(Error::TooLarge(format!(
                "precomputing A^T A needs n <= {MAX_PRECOMPUTED_GRAM_N}, got {}",
                a.cols()
            )));
        }
        let gram = (strategy == GramStrategy::Precompute).then(|| a.gram());
        Ok(Self {
            a,
            b,
            loss,
            lambda,
            gram,
        })
    }

    pub fn d(&self) -> usize {
        self.a.rows()
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn data(&self) -> &SparseColumns {
        &self.a
    }

    pub fn labels(&self) -> &[f64] {
        &self.b
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma_loss(&self) -> f64 {
        self.loss.gamma()
    }

    /// `lambda n`.
    pub fn scale(&self) -> f64 {
        self.lambda * self.n() as f64
    }

    pub fn has_precomputed_gram(&self) -> bool {
        self.gram.is_some()
    }

    /// `A^T A`, from the cache when present.
    pub fn gram(&self) -> SymmetricMatrix {
        match &self.gram {
            Some(g) => g.clone(),
            None => self.a.gram(),
        }
    }

    /// Compact block of `X = A^T A / (lambda n)` on `s`.
    pub fn x_block(&self, s: &Subset) -> Vec<f64> {
        let mut block = match &self.gram {
            Some(g) => g.compact_block(s),
            None => self.a.gram_block(s),
        };
        let scale = self.scale();
        block.iter_mut().for_each(|x| *x /= scale);
        block
    }

    fn term(&self, i: usize) -> CoordinateTerm {
        CoordinateTerm::Conjugate {
            loss: self.loss,
            label: self.b[i],
            scale: 1.0,
        }
    }

    /// `psi_i(t) = phi_i*(-t)`.
    pub fn dual_term(&self, i: usize, alpha_i: f64) -> f64 {
        self.loss.conjugate(-alpha_i, self.b[i])
    }

    /// Starting dual point that is feasible for the loss.
    pub fn initial_alpha(&self) -> Vec<f64> {
        vec![0.0; self.n()]
    }
}

pub fn primal_value(problem: &ErmProblem, w: &[f64]) -> f64 {
    let n = problem.n();
    let loss: f64 = (0..n)
        .map(|i| problem.loss.value(problem.a.col_dot(i, w), problem.b[i]))
        .sum();
    loss / n as f64 + 0.5 * problem.lambda * linalg::dot(w, w)
}

fn dual_value_with_bar(problem: &ErmProblem, alpha: &[f64], alpha_bar: &[f64]) -> f64 {
    let n = problem.n();
    let conj: f64 = (0..n).map(|i| problem.dual_term(i, alpha[i])).sum();
    -conj / n as f64 - 0.5 * problem.lambda * linalg::dot(alpha_bar, alpha_bar)
}

pub fn dual_value(problem: &ErmProblem, alpha: &[f64]) -> f64 {
    let mut bar = problem.a.matvec(alpha);
    let scale = problem.scale();
    bar.iter_mut().for_each(|x| *x /= scale);
    dual_value_with_bar(problem, alpha, &bar)
}

/// Dual iterate with the maintained average `alpha_bar = A alpha / (lambda n)`,
/// which is also the primal iterate `w`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl DualState {
    pub fn new(problem: &ErmProblem, alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() != problem.n() {
            return Err(Error::DimensionMismatch {
                expected: problem.n(),
                got: alpha.len(),
            });
        }
        let mut alpha_bar = problem.a.matvec(&alpha);
        let scale = problem.scale();
        alpha_bar.iter_mut().for_each(|x| *x /= scale);
        Ok(Self { alpha, alpha_bar })
    }

    pub fn zeros(problem: &ErmProblem) -> Self {
        Self {
            alpha: vec![0.0; problem.n()],
            alpha_bar: vec![0.0; problem.d()],
        }
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha_bar(&self) -> &[f64] {
        &self.alpha_bar
    }

    /// The primal iterate `w = grad g*(alpha_bar) = alpha_bar`.
    pub fn w(&self) -> &[f64] {
        &self.alpha_bar
    }

    /// `|alpha_bar - A alpha / (lambda n)|_inf`.
    pub fn drift(&self, problem: &ErmProblem) -> f64 {
        let fresh = DualState::new(problem, self.alpha.clone()).expect("dimensions match");
        fresh
            .alpha_bar
            .iter()
            .zip(&self.alpha_bar)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    fn apply(&mut self, problem: &ErmProblem, s: &Subset, delta: &[f64]) {
        let scale = problem.scale();
        for (k, i) in s.iter().enumerate() {
            self.alpha[i] += delta[k];
            problem.a.col_axpy(i, delta[k] / scale, &mut self.alpha_bar);
        }
    }
}

pub fn duality_gap(problem: &ErmProblem, state: &DualState) -> f64 {
    primal_value(problem, state.w()) - dual_value_with_bar(problem, &state.alpha, &state.alpha_bar)
}

/// SDNA: exact maximization of the dual over the coordinates in `s`,
/// i.e. `min <(A^T w)_S, h> + 1/2 h^T X_S h + sum_{i in S} phi_i*(-alpha_i - h_i)`.
pub fn sdna_step(problem: &ErmProblem, state: &mut DualState, s: &Subset) -> Result<()> {
    let lin: Vec<f64> = s.iter().map(|i| problem.a.col_dot(i, state.w())).collect();
    let q = problem.x_block(s);
    let terms: Vec<CoordinateTerm> = s.iter().map(|i| problem.term(i)).collect();
    let refs: Vec<&CoordinateTerm> = terms.iter().collect();
    let delta = solve_block(&q, &lin, &refs, &s.gather(&state.alpha), s.indices())?;
    state.apply(problem, s, &delta);
    Ok(())
}

/// Minibatch SDCA: independent scalar problems with curvature
/// `v_i / (lambda n)`, all using the current `w`.
pub fn sdca_step(problem: &ErmProblem, state: &mut DualState, s: &Subset, v: &[f64]) -> Result<()> {
    if v.len() != problem.n() {
        return Err(Error::DimensionMismatch {
            expected: problem.n(),
            got: v.len(),
        });
    }
    let scale = problem.scale();
    let mut delta = Vec::with_capacity(s.len());
    for i in s.iter() {
        let c = problem.a.col_dot(i, state.w());
        delta.push(scalar_prox(
            &problem.term(i),
            c,
            v[i] / scale,
            state.alpha[i],
        )?);
    }
    state.apply(problem, s, &delta);
    Ok(())
}

/// ESO vector for `A^T A` under tau-nice sampling from row sparsity:
/// `v_i = sum_j (1 + (omega_j - 1)(tau - 1)/max(1, n - 1)) A_ji^2`, with
/// `omega_j` the number of nonzeros in row `j`.
pub fn sparse_tau_nice_eso(a: &SparseColumns, tau: usize) -> Vec<f64> {
    let n = a.cols();
    let mut omega = vec![0usize; a.rows()];
    for j in 0..n {
        for &r in a.column(j).0 {
            omega[r] += 1;
        }
    }
    let ratio = (tau as f64 - 1.0) / (n.max(2) - 1) as f64;
    (0..n)
        .map(|j| {
            let (r, v) = a.column(j);
            r.iter()
                .zip(v)
                .map(|(&row, &x)| (1.0 + (omega[row] as f64 - 1.0) * ratio) * x * x)
                .sum()
        })
        .collect()
}

/// The ESO vector used by SDCA runs and by `theta` in reports.
pub fn sdca_eso_vector(problem: &ErmProblem, spec: &SamplingSpec) -> Result<Vec<f64>> {
    if problem.n() <= CERTIFIED_ESO_MAX_N || spec.tau().is_none() {
        spec.eso_vector(&problem.gram(), EsoStrategy::CertifiedScaling)
    } else {
        Ok(sparse_tau_nice_eso(
            &problem.a,
            spec.tau().expect("checked"),
        ))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErmSolverKind {
    Sdna,
    Sdca,
}

impl ErmSolverKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sdna => "sdna",
            Self::Sdca => "sdca",
        }
    }
}

#[derive(Clone, Debug)]
pub enum ErmSolver {
    Sdna,
    Sdca { v: Vec<f64> },
}

impl ErmSolver {
    pub fn kind(&self) -> ErmSolverKind {
        match self {
            Self::Sdna => ErmSolverKind::Sdna,
            Self::Sdca { .. } => ErmSolverKind::Sdca,
        }
    }

    pub fn prepare(kind: ErmSolverKind, problem: &ErmProblem, spec: &SamplingSpec) -> Result<Self> {
        Ok(match kind {
            ErmSolverKind::Sdna => Self::Sdna,
            ErmSolverKind::Sdca => Self::Sdca {
                v: sdca_eso_vector(problem, spec)?,
            },
        })
    }

    pub fn step(&self, problem: &ErmProblem, state: &mut DualState, s: &Subset) -> Result<()> {
        match self {
            Self::Sdna => sdna_step(problem, state, s),
            Self::Sdca { v } => sdca_step(problem, state, s, v),
        }
    }
}

/// One checkpoint row of an ERM run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub solver: String,
    pub tau: usize,
    pub seed: u64,
    pub iter: usize,
    pub epoch: f64,
    pub seconds: f64,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct ErmRunOptions {
    pub iterations: usize,
    /// Evaluate every this many iterations; 0 evaluates only at the end.
    pub checkpoint_every: usize,
    /// Stop at the first checkpoint with gap at most this.
    pub eps: Option<f64>,
    /// Recorded in the trace.
    pub seed: u64,
}

impl ErmRunOptions {
    /// Budget and checkpoint spacing given in epochs for a sampling of
    /// expected size `tau`.
    pub fn from_epochs(epochs: f64, checkpoint_epochs: f64, n: usize, tau: f64, seed: u64) -> Self {
        let per_epoch = n as f64 / tau;
        Self {
            iterations: (epochs * per_epoch).ceil() as usize,
            checkpoint_every: ((checkpoint_epochs * per_epoch).round() as usize).max(1),
            eps: None,
            seed,
        }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = Some(eps);
        self
    }
}

/// Runs SDNA or SDCA from `alpha = 0`. Rows are emitted at checkpoints
/// `k >= 1`; `seconds` counts only time spent inside steps. For SDNA a
/// decrease of the dual between checkpoints is an invariant violation.
pub fn run_erm<R: Rng + ?Sized>(
    solver: &ErmSolver,
    problem: &ErmProblem,
    spec: &SamplingSpec,
    opts: &ErmRunOptions,
    rng: &mut R,
) -> Result<Vec<TraceRecord>> {
    if !spec.is_uniform() {
        return Err(Error::NonUniformSampling);
    }
    if spec.n() != problem.n() {
        return Err(Error::DimensionMismatch {
            expected: problem.n(),
            got: spec.n(),
        });
    }
    let mut state = DualState::zeros(problem);
    let tau = spec.expected_size();
    let n = problem.n() as f64;
    let mut records = Vec::new();
    let mut seconds = 0.0;
    let mut last_dual = dual_value(problem, state.alpha());
    let mut k = 0;
    while k < opts.iterations {
        let stop = if opts.checkpoint_every == 0 {
            opts.iterations
        } else {
            (k + opts.checkpoint_every).min(opts.iterations)
        };
        let start = Instant::now();
        while k < stop {
            let s = spec.draw(rng);
            solver.step(problem, &mut state, &s)?;
            k += 1;
        }
        seconds += start.elapsed().as_secs_f64();

        let drift = state.drift(problem);
        if drift > DRIFT_TOL {
            return Err(Error::Invariant(format!(
                "average drifted from A alpha / (lambda n) by {drift:e} at iteration {k}"
            )));
        }
        let primal = primal_value(problem, state.w());
        let dual = dual_value_with_bar(problem, state.alpha(), state.alpha_bar());
        if solver.kind() == ErmSolverKind::Sdna
            && dual < last_dual - 1e-10 * (1.0 + last_dual.abs())
        {
            return Err(Error::Invariant(format!(
                "SDNA decreased the dual at iteration {k}: {last_dual:e} -> {dual:e}"
            )));
        }
        if !(primal.is_finite() && dual.is_finite()) {
            return Err(Error::NonFinite("objective at checkpoint"));
        }
        last_dual = dual;
        let gap = primal - dual;
        records.push(TraceRecord {
            solver: solver.kind().name().to_string(),
            tau: spec.tau().unwrap_or(tau.round() as usize),
            seed: opts.seed,
            iter: k,
            epoch: k as f64 * tau / n,
            seconds,
            primal,
            dual,
            gap,
        });
        if opts.eps.is_some_and(|e| gap <= e) {
            break;
        }
    }
    Ok(records)
}

/// Median seconds per epoch (`ceil(n / tau)` steps) over `reps` timed
/// blocks of `epochs` epochs each, after one untimed warm-up epoch.
pub fn epoch_seconds<R: Rng + ?Sized>(
    solver: &ErmSolver,
    problem: &ErmProblem,
    spec: &SamplingSpec,
    epochs: usize,
    reps: usize,
    rng: &mut R,
) -> Result<f64> {
    if epochs == 0 || reps == 0 {
        return Err(Error::InvalidArgument(
            "epochs and reps must be positive".into(),
        ));
    }
    let per_epoch = (problem.n() as f64 / spec.expected_size()).ceil() as usize;
    let mut state = DualState::zeros(problem);
    for _ in 0..per_epoch {
        solver.step(problem, &mut state, &spec.draw(rng))?;
    }
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        for _ in 0..epochs * per_epoch {
            solver.step(problem, &mut state, &spec.draw(rng))?;
        }
        times.push(start.elapsed().as_secs_f64() / epochs as f64);
    }
    times.sort_by(f64::total_cmp);
    Ok(times[reps / 2])
}

/// First epoch at which the recorded gap is at most `eps`.
pub fn epochs_to_gap(trace: &[TraceRecord], eps: f64) -> Option<f64> {
    trace.iter().find(|r| r.gap <= eps).map(|r| r.epoch)
}
