//! Block proximal Newton (Algorithm 1) and parallel coordinate descent
//! (PCDM) for `F(x) = f(x) + sum_i psi_i(x_i)` with separable strongly convex
//! `psi`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky, Subset, SymmetricMatrix};
use crate::loss::LossKind;
use crate::sampling::SamplingSpec;
use crate::smooth::{ProgressRecord, Recorder, RunOptions, SmoothOracle};

/// Gradient tolerance of the inner block solver.
pub const INNER_TOL: f64 = 1e-10;
/// Newton iterations allowed for one block subproblem.
pub const MAX_INNER: usize = 100;
/// Derivative tolerance of the scalar prox solver.
pub const SCALAR_TOL: f64 = 1e-12;

/// One coordinate function `psi_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoordinateTerm {
    Zero,
    /// `(a/2) t^2 + b t`
    Quadratic {
        a: f64,
        b: f64,
    },
    /// `scale * phi*(-t)` for the loss with the given label.
    Conjugate {
        loss: LossKind,
        label: f64,
        scale: f64,
    },
}

impl CoordinateTerm {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Quadratic { a, b } => 0.5 * a * t * t + b * t,
            Self::Conjugate { loss, label, scale } => scale * loss.conjugate(-t, label),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Quadratic { a, b } => a * t + b,
            Self::Conjugate { loss, label, scale } => -scale * loss.conjugate_derivative(-t, label),
        }
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Quadratic { a, .. } => a,
            Self::Conjugate { loss, label, scale } => {
                scale * loss.conjugate_second_derivative(-t, label)
            }
        }
    }

    /// Strong-convexity modulus.
    pub fn gamma(&self) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Quadratic { a, .. } => a,
            Self::Conjugate { loss, scale, .. } => scale * loss.gamma(),
        }
    }

    /// Closed domain `[lo, hi]` of finite values.
    pub fn domain(&self) -> (f64, f64) {
        match *self {
            Self::Conjugate { loss, label, .. } => {
                let (lo, hi) = loss.conjugate_domain(label);
                (-hi, -lo)
            }
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// `(a, b)` when the term is `(a/2) t^2 + b t`.
    pub fn as_quadratic(&self) -> Option<(f64, f64)> {
        match *self {
            Self::Zero => Some((0.0, 0.0)),
            Self::Quadratic { a, b } => Some((a, b)),
            Self::Conjugate {
                loss: LossKind::Quadratic,
                label,
                scale,
            } => Some((scale, -scale * label)),
            Self::Conjugate { .. } => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Zero => Ok(()),
            Self::Quadratic { a, b } if a >= 0.0 && a.is_finite() && b.is_finite() => Ok(()),
            Self::Conjugate { loss, label, scale } if scale > 0.0 && scale.is_finite() => {
                loss.check_label(label)
            }
            _ => Err(Error::InvalidArgument(format!(
                "invalid coordinate term {self:?}"
            ))),
        }
    }
}

/// `psi(x) = sum_i psi_i(x_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparableTerm {
    terms: Vec<CoordinateTerm>,
}

impl SeparableTerm {
    pub fn new(terms: Vec<CoordinateTerm>) -> Result<Self> {
        for t in &terms {
            t.validate()?;
        }
        Ok(Self { terms })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            terms: vec![CoordinateTerm::Zero; n],
        }
    }

    pub fn quadratic(a: &[f64], b: &[f64]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                got: b.len(),
            });
        }
        Self::new(
            a.iter()
                .zip(b)
                .map(|(&a, &b)| CoordinateTerm::Quadratic { a, b })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term(&self, i: usize) -> &CoordinateTerm {
        &self.terms[i]
    }

    pub fn terms(&self) -> &[CoordinateTerm] {
        &self.terms
    }

    pub fn gamma(&self) -> Vec<f64> {
        self.terms.iter().map(CoordinateTerm::gamma).collect()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().zip(x).map(|(t, &x)| t.value(x)).sum()
    }
}

fn interior_start(z: f64, (lo, hi): (f64, f64)) -> f64 {
    if lo.is_finite() && hi.is_finite() {
        let margin = 1e-3 * (hi - lo);
        z.clamp(lo + margin, hi - margin)
    } else if lo.is_finite() && z <= lo {
        lo + 1.0
    } else if hi.is_finite() && z >= hi {
        hi - 1.0
    } else {
        z
    }
}

/// Minimizes `lin^T h + 1/2 h^T Q h + sum_i psi_i(base_i + h_i)` over `h`,
/// with `Q` a `k x k` row-major positive semidefinite block. `labels` names
/// the coordinates in error reports.
pub fn solve_block(
    q: &[f64],
    lin: &[f64],
    terms: &[&CoordinateTerm],
    base: &[f64],
    labels: &[usize],
) -> Result<Vec<f64>> {
    let k = lin.len();
    let quadratic: Option<Vec<(f64, f64)>> = terms.iter().map(|t| t.as_quadratic()).collect();
    if let Some(ab) = quadratic {
        if k == 1 {
            let (a, b) = ab[0];
            return Ok(vec![-(lin[0] + a * base[0] + b) / (q[0] + a)]);
        }
        let mut block = q.to_vec();
        let mut rhs = vec![0.0; k];
        for (i, &(a, b)) in ab.iter().enumerate() {
            block[i * k + i] += a;
            rhs[i] = -(lin[i] + a * base[i] + b);
        }
        Cholesky::factor(&block, k, labels)?.solve_in_place(&mut rhs);
        return Ok(rhs);
    }
    block_newton(q, lin, terms, base, labels)
}

fn block_newton(
    q: &[f64],
    lin: &[f64],
    terms: &[&CoordinateTerm],
    base: &[f64],
    labels: &[usize],
) -> Result<Vec<f64>> {
    let k = lin.len();
    let domains: Vec<(f64, f64)> = terms.iter().map(|t| t.domain()).collect();
    let mut z: Vec<f64> = base
        .iter()
        .zip(&domains)
        .map(|(&b, &d)| interior_start(b, d))
        .collect();
    let objective = |z: &[f64]| -> f64 {
        let h: Vec<f64> = z.iter().zip(base).map(|(z, b)| z - b).collect();
        let mut qh = 0.0;
        for i in 0..k {
            qh += h[i] * linalg::dot(&q[i * k..(i + 1) * k], &h);
        }
        linalg::dot(lin, &h) + 0.5 * qh + terms.iter().zip(z).map(|(t, &z)| t.value(z)).sum::<f64>()
    };
    let gradient = |z: &[f64]| -> (Vec<f64>, Vec<f64>, f64) {
        let h: Vec<f64> = z.iter().zip(base).map(|(z, b)| z - b).collect();
        let r: Vec<f64> = (0..k)
            .map(|i| lin[i] + linalg::dot(&q[i * k..(i + 1) * k], &h) + terms[i].derivative(z[i]))
            .collect();
        let norm = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        (h, r, norm)
    };
    let mut value = objective(&z);
    // iterate past the tolerance while Newton still makes progress, so the
    // answer does not depend on how the subproblem happens to be scaled
    for _ in 0..MAX_INNER {
        let (h, r, residual) = gradient(&z);
        if residual <= 1e-4 * INNER_TOL {
            return Ok(h);
        }
        let mut hess = q.to_vec();
        for i in 0..k {
            hess[i * k + i] += terms[i].second_derivative(z[i]);
        }
        let mut d: Vec<f64> = r.iter().map(|x| -x).collect();
        Cholesky::factor(&hess, k, labels)?.solve_in_place(&mut d);
        let mut t = 1.0f64;
        for i in 0..k {
            let (lo, hi) = domains[i];
            if d[i] < 0.0 && lo.is_finite() {
                t = t.min(0.99 * (z[i] - lo) / -d[i]);
            } else if d[i] > 0.0 && hi.is_finite() {
                t = t.min(0.99 * (hi - z[i]) / d[i]);
            }
        }
        let slope = linalg::dot(&r, &d);
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = z.iter().zip(&d).map(|(z, d)| z + t * d).collect();
            let v = objective(&trial);
            if v <= value + 1e-4 * t * slope + 1e-15 * (1.0 + value.abs()) {
                let moved = trial.iter().zip(&z).any(|(a, b)| a != b);
                z = trial;
                value = v;
                accepted = moved;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let (h, _, residual) = gradient(&z);
    if residual <= INNER_TOL {
        Ok(h)
    } else {
        Err(Error::InnerSolver {
            iterations: MAX_INNER,
            residual,
        })
    }
}

/// Minimizes `c h + (v/2) h^2 + psi(base + h)` over `h`.
pub fn scalar_prox(term: &CoordinateTerm, c: f64, v: f64, base: f64) -> Result<f64> {
    if !(c.is_finite() && v.is_finite() && base.is_finite()) {
        return Err(Error::NonFinite("scalar prox input"));
    }
    if let Some((a, b)) = term.as_quadratic() {
        return Ok(-(c + a * base + b) / (v + a));
    }
    let deriv = |z: f64| c + v * (z - base) + term.derivative(z);
    let curv = |z: f64| v + term.second_derivative(z);
    let (mut lo, mut hi) = term.domain();
    // expand infinite ends until the derivative changes sign
    let mut z = interior_start(base, (lo, hi));
    let mut step = 1.0;
    while !lo.is_finite() {
        if deriv(z - step) < 0.0 {
            lo = z - step;
        }
        step *= 2.0;
    }
    step = 1.0;
    while !hi.is_finite() {
        if deriv(z + step) > 0.0 {
            hi = z + step;
        }
        step *= 2.0;
    }
    for _ in 0..500 {
        let d = deriv(z);
        if d.abs() <= SCALAR_TOL {
            break;
        }
        if d > 0.0 {
            hi = z;
        } else {
            lo = z;
        }
        if hi - lo <= 4.0 * f64::EPSILON * z.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let newton = z - d / curv(z);
        z = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(z - base)
}

fn check_inputs(n: usize, psi: &SeparableTerm, x: &[f64]) -> Result<()> {
    for got in [psi.len(), x.len()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    Ok(())
}

/// Algorithm 1 step: exact minimization of the block model
/// `<grad f(x), h_S> + 1/2 h^T M_S h + sum_{i in S} psi_i(x_i + h_i)`.
pub fn alg1_step<O: SmoothOracle + ?Sized>(
    oracle: &O,
    m: &SymmetricMatrix,
    psi: &SeparableTerm,
    s: &Subset,
    x: &[f64],
) -> Result<Vec<f64>> {
    check_inputs(m.dim(), psi, x)?;
    let g = oracle.partial_gradient(x, s);
    let terms: Vec<&CoordinateTerm> = s.iter().map(|i| psi.term(i)).collect();
    let h = solve_block(&m.compact_block(s), &g, &terms, &s.gather(x), s.indices())?;
    let mut out = x.to_vec();
    for (k, i) in s.iter().enumerate() {
        out[i] += h[k];
    }
    Ok(out)
}

/// PCDM step: independent scalar prox problems with curvature `v_i`.
pub fn pcdm_step<O: SmoothOracle + ?Sized>(
    oracle: &O,
    v: &[f64],
    psi: &SeparableTerm,
    s: &Subset,
    x: &[f64],
) -> Result<Vec<f64>> {
    check_inputs(v.len(), psi, x)?;
    let g = oracle.partial_gradient(x, s);
    let mut out = x.to_vec();
    for (k, i) in s.iter().enumerate() {
        out[i] += scalar_prox(psi.term(i), g[k], v[i], x[i])?;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompositeAlgorithm {
    Alg1,
    Pcdm,
}

#[derive(Clone, Debug)]
pub enum CompositeStepper {
    Alg1 { m: SymmetricMatrix },
    Pcdm { v: Vec<f64> },
}

impl CompositeStepper {
    pub fn algorithm(&self) -> CompositeAlgorithm {
        match self {
            Self::Alg1 { .. } => CompositeAlgorithm::Alg1,
            Self::Pcdm { .. } => CompositeAlgorithm::Pcdm,
        }
    }

    pub fn step<O: SmoothOracle + ?Sized>(
        &self,
        oracle: &O,
        psi: &SeparableTerm,
        s: &Subset,
        x: &[f64],
    ) -> Result<Vec<f64>> {
        match self {
            Self::Alg1 { m } => alg1_step(oracle, m, psi, s, x),
            Self::Pcdm { v } => pcdm_step(oracle, v, psi, s, x),
        }
    }
}

/// Minimizer of `F` by full-support Algorithm 1 steps until the step is
/// below `1e-13` in max norm.
pub fn reference_minimizer<O: SmoothOracle + ?Sized>(
    oracle: &O,
    psi: &SeparableTerm,
    x0: &[f64],
) -> Result<Vec<f64>> {
    let m = oracle.smoothness();
    let full = Subset::full(m.dim());
    let mut x = x0.to_vec();
    let mut last = f64::INFINITY;
    for _ in 0..100_000 {
        let next = alg1_step(oracle, m, psi, &full, &x)?;
        let step = next
            .iter()
            .zip(&x)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        x = next;
        let scale = 1.0 + x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if step < 1e-13 * scale || (step >= last && step < 1e-11 * scale) {
            return Ok(x);
        }
        last = step;
    }
    Err(Error::InnerSolver {
        iterations: 100_000,
        residual: last,
    })
}

pub fn composite_value<O: SmoothOracle + ?Sized>(
    oracle: &O,
    psi: &SeparableTerm,
    x: &[f64],
) -> f64 {
    oracle.value(x) + psi.value(x)
}

/// Runs Algorithm 1 or PCDM, recording `F(x^k) - F(x*)`. Algorithm 1 must
/// not increase `F`.
pub fn run_composite<O: SmoothOracle + ?Sized, R: Rng + ?Sized>(
    stepper: &CompositeStepper,
    oracle: &O,
    psi: &SeparableTerm,
    spec: &SamplingSpec,
    x0: &[f64],
    opts: &RunOptions,
    rng: &mut R,
) -> Result<Vec<ProgressRecord>> {
    if !spec.is_uniform() {
        return Err(Error::NonUniformSampling);
    }
    check_inputs(oracle.dim(), psi, x0)?;
    if spec.n() != oracle.dim() {
        return Err(Error::DimensionMismatch {
            expected: oracle.dim(),
            got: spec.n(),
        });
    }
    let x_star = reference_minimizer(oracle, psi, x0)?;
    let f_star = composite_value(oracle, psi, &x_star);
    let mut x = x0.to_vec();
    let mut value = composite_value(oracle, psi, &x);
    let mut rec = Recorder::new(spec, opts.checkpoint_every, value - f_star);
    if opts.iterations == 0 || opts.eps.is_some_and(|e| value - f_star < e) {
        return Ok(rec.records);
    }
    let monotone = stepper.algorithm() == CompositeAlgorithm::Alg1;
    for k in 1..=opts.iterations {
        let s = spec.draw(rng);
        x = stepper.step(oracle, psi, &s, &x)?;
        let next = composite_value(oracle, psi, &x);
        if monotone && next > value + 1e-12 * (1.0 + value.abs()) {
            return Err(Error::Invariant(format!(
                "algorithm 1 increased the objective at iteration {k}: {value:e} -> {next:e}"
            )));
        }
        value = next;
        if rec.observe(k, value - f_star, opts)? {
            break;
        }
    }
    Ok(rec.records)
}
