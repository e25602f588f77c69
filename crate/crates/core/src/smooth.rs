//! Methods 1, 2 and 3 for smooth strongly convex minimization with
//! random coordinate blocks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Subset, SymmetricMatrix};
use crate::sampling::SamplingSpec;

/// Largest dimension for which Method 2 will invert `E[M_S]`.
pub const METHOD2_MAX_DIM: usize = 4096;

/// Residual growth factor that aborts a run.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// A smooth function with curvature bounds `G <= Hessian <= M` in the sense
/// of the quadratic upper and lower models.
pub trait SmoothOracle {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// Gradient entries on `s`, in the order of `s.indices()`.
    fn partial_gradient(&self, x: &[f64], s: &Subset) -> Vec<f64> {
        s.gather(&self.gradient(x))
    }

    fn smoothness(&self) -> &SymmetricMatrix;
    fn strong_convexity(&self) -> &SymmetricMatrix;
}

/// `f(x) = 1/2 x^T M x - c^T x` with `M` positive definite.
#[derive(Clone, Debug)]
pub struct QuadraticObjective {
    m: SymmetricMatrix,
    c: Vec<f64>,
    x_star: Vec<f64>,
    f_star: f64,
}

impl QuadraticObjective {
    pub fn new(m: SymmetricMatrix, c: Vec<f64>) -> Result<Self> {
        if c.len() != m.dim() {
            return Err(Error::DimensionMismatch {
                expected: m.dim(),
                got: c.len(),
            });
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("linear term"));
        }
        let x_star = linalg::solve_spd(&m, &c)?;
        let f_star = -0.5 * linalg::dot(&c, &x_star);
        Ok(Self {
            m,
            c,
            x_star,
            f_star,
        })
    }

    pub fn matrix(&self) -> &SymmetricMatrix {
        &self.m
    }

    pub fn linear_term(&self) -> &[f64] {
        &self.c
    }

    pub fn minimizer(&self) -> &[f64] {
        &self.x_star
    }

    pub fn optimal_value(&self) -> f64 {
        self.f_star
    }

    /// `f(x) - f*`, evaluated as `1/2 (x - x*)^T M (x - x*)` so it stays
    /// accurate (and non-negative) near the optimum.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let e: Vec<f64> = x.iter().zip(&self.x_star).map(|(a, b)| a - b).collect();
        0.5 * self.m.quad_form(&e)
    }
}

impl SmoothOracle for QuadraticObjective {
    fn dim(&self) -> usize {
        self.m.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.m.quad_form(x) - linalg::dot(&self.c, x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.m.matvec(x);
        g.iter_mut().zip(&self.c).for_each(|(g, c)| *g -= c);
        g
    }

    fn partial_gradient(&self, x: &[f64], s: &Subset) -> Vec<f64> {
        s.iter()
            .map(|i| linalg::dot(self.m.row(i), x) - self.c[i])
            .collect()
    }

    fn smoothness(&self) -> &SymmetricMatrix {
        &self.m
    }

    fn strong_convexity(&self) -> &SymmetricMatrix {
        &self.m
    }
}

/// `1/2 x^T M x - c^T x` with `M` only positive semidefinite; used where
/// strong convexity comes from a separate term.
#[derive(Clone, Debug)]
pub struct QuadraticForm {
    m: SymmetricMatrix,
    c: Vec<f64>,
}

impl QuadraticForm {
    pub fn new(m: SymmetricMatrix, c: Vec<f64>) -> Result<Self> {
        check_point(&c, m.dim())?;
        Ok(Self { m, c })
    }
}

impl SmoothOracle for QuadraticForm {
    fn dim(&self) -> usize {
        self.m.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.m.quad_form(x) - linalg::dot(&self.c, x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.m.matvec(x);
        g.iter_mut().zip(&self.c).for_each(|(g, c)| *g -= c);
        g
    }

    fn partial_gradient(&self, x: &[f64], s: &Subset) -> Vec<f64> {
        s.iter()
            .map(|i| linalg::dot(self.m.row(i), x) - self.c[i])
            .collect()
    }

    fn smoothness(&self) -> &SymmetricMatrix {
        &self.m
    }

    fn strong_convexity(&self) -> &SymmetricMatrix {
        &self.m
    }
}

fn check_point(x: &[f64], n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    Ok(())
}

/// `x - (M_S)^dagger grad f(x)`; reads only the `S` entries of the gradient.
pub fn method1_step<O: SmoothOracle + ?Sized>(
    oracle: &O,
    m: &SymmetricMatrix,
    s: &Subset,
    x: &[f64],
) -> Result<Vec<f64>> {
    check_point(x, m.dim())?;
    let mut g = oracle.partial_gradient(x, s);
    linalg::factor_block(m, s)?.solve_in_place(&mut g);
    let mut out = x.to_vec();
    for (k, i) in s.iter().enumerate() {
        out[i] -= g[k];
    }
    Ok(out)
}

/// `E[M_S]^{-1} D(p)`, dense row-major.
#[derive(Clone, Debug)]
pub struct Method2Preconditioner {
    n: usize,
    data: Vec<f64>,
}

impl Method2Preconditioner {
    pub fn new(m: &SymmetricMatrix, spec: &SamplingSpec) -> Result<Self> {
        let n = m.dim();
        if n > METHOD2_MAX_DIM {
            return Err(Error::TooLarge(format!(
                "method 2 inverts an {n}x{n} matrix; limit is {METHOD2_MAX_DIM}"
            )));
        }
        let p = spec.probability_vector()?.p;
        let inv = linalg::inverse_spd(&spec.expected_submatrix(m)?)?;
        let mut data = inv.as_row_major().to_vec();
        for row in data.chunks_mut(n) {
            row.iter_mut().zip(&p).for_each(|(a, p)| *a *= p);
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// `x - I_S E[M_S]^{-1} D(p) grad f(x)`.
pub fn method2_step<O: SmoothOracle + ?Sized>(
    oracle: &O,
    precond: &Method2Preconditioner,
    s: &Subset,
    x: &[f64],
) -> Result<Vec<f64>> {
    check_point(x, precond.dim())?;
    let g = oracle.gradient(x);
    let mut out = x.to_vec();
    for i in s.iter() {
        out[i] -= linalg::dot(precond.row(i), &g);
    }
    Ok(out)
}

/// `x_i - grad_i f(x) / v_i` for `i` in `S`.
pub fn method3_step<O: SmoothOracle + ?Sized>(
    oracle: &O,
    v: &[f64],
    s: &Subset,
    x: &[f64],
) -> Result<Vec<f64>> {
    check_point(x, v.len())?;
    let g = oracle.partial_gradient(x, s);
    let mut out = x.to_vec();
    for (k, i) in s.iter().enumerate() {
        out[i] -= g[k] / v[i];
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothMethod {
    Method1,
    Method2,
    Method3,
}

/// A prepared solver: the per-method data computed once before the loop.
#[derive(Clone, Debug)]
pub enum SmoothStepper {
    Method1 { m: SymmetricMatrix },
    Method2(Method2Preconditioner),
    Method3 { v: Vec<f64> },
}

impl SmoothStepper {
    /// `v` is required for Method 3 and ignored otherwise.
    pub fn new(
        method: SmoothMethod,
        m: &SymmetricMatrix,
        spec: &SamplingSpec,
        v: Option<&[f64]>,
    ) -> Result<Self> {
        if spec.n() != m.dim() {
            return Err(Error::DimensionMismatch {
                expected: m.dim(),
                got: spec.n(),
            });
        }
        Ok(match method {
            SmoothMethod::Method1 => Self::Method1 { m: m.clone() },
            SmoothMethod::Method2 => Self::Method2(Method2Preconditioner::new(m, spec)?),
            SmoothMethod::Method3 => {
                let v =
                    v.ok_or_else(|| Error::InvalidArgument("method 3 needs an ESO vector".into()))?;
                check_point(v, m.dim())?;
                if v.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                    return Err(Error::InvalidArgument("ESO vector must be positive".into()));
                }
                Self::Method3 { v: v.to_vec() }
            }
        })
    }

    pub fn method(&self) -> SmoothMethod {
        match self {
            Self::Method1 { .. } => SmoothMethod::Method1,
            Self::Method2(_) => SmoothMethod::Method2,
            Self::Method3 { .. } => SmoothMethod::Method3,
        }
    }

    pub fn step<O: SmoothOracle + ?Sized>(
        &self,
        oracle: &O,
        s: &Subset,
        x: &[f64],
    ) -> Result<Vec<f64>> {
        match self {
            Self::Method1 { m } => method1_step(oracle, m, s, x),
            Self::Method2(p) => method2_step(oracle, p, s, x),
            Self::Method3 { v } => method3_step(oracle, v, s, x),
        }
    }
}

/// One checkpoint of a primal run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressRecord {
    pub iteration: usize,
    /// `iteration * E|S| / n`.
    pub epoch: f64,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub iterations: usize,
    /// Record every this many iterations; 0 records only the endpoints.
    pub checkpoint_every: usize,
    /// Stop once the residual drops below this.
    pub eps: Option<f64>,
}

impl RunOptions {
    pub fn new(iterations: usize, checkpoint_every: usize) -> Self {
        Self {
            iterations,
            checkpoint_every,
            eps: None,
        }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = Some(eps);
        self
    }
}

pub(crate) struct Recorder {
    every: usize,
    tau: f64,
    n: f64,
    initial: f64,
    pub(crate) records: Vec<ProgressRecord>,
}

impl Recorder {
    pub(crate) fn new(spec: &SamplingSpec, every: usize, initial: f64) -> Self {
        let mut r = Self {
            every,
            tau: spec.expected_size(),
            n: spec.n() as f64,
            initial,
            records: Vec::new(),
        };
        r.push(0, initial);
        r
    }

    fn push(&mut self, iteration: usize, residual: f64) {
        self.records.push(ProgressRecord {
            iteration,
            epoch: iteration as f64 * self.tau / self.n,
            residual,
        });
    }

    /// Records `residual` if due, and checks for divergence. Returns true
    /// when the run should stop.
    pub(crate) fn observe(&mut self, k: usize, residual: f64, opts: &RunOptions) -> Result<bool> {
        if !residual.is_finite() || residual > DIVERGENCE_FACTOR * self.initial.max(1e-12) {
            return Err(Error::Divergence {
                iteration: k,
                residual,
                initial: self.initial,
            });
        }
        let done = k == opts.iterations || opts.eps.is_some_and(|e| residual < e);
        if done || (self.every > 0 && k % self.every == 0) {
            self.push(k, residual);
        }
        Ok(done)
    }
}

/// Runs one of the three methods on a quadratic, recording `f(x^k) - f*`.
/// Method 1 must never increase `f`; a violation is reported as an
/// invariant error.
pub fn run_smooth<R: Rng + ?Sized>(
    stepper: &SmoothStepper,
    objective: &QuadraticObjective,
    spec: &SamplingSpec,
    x0: &[f64],
    opts: &RunOptions,
    rng: &mut R,
) -> Result<Vec<ProgressRecord>> {
    check_point(x0, objective.dim())?;
    if spec.n() != objective.dim() {
        return Err(Error::DimensionMismatch {
            expected: objective.dim(),
            got: spec.n(),
        });
    }
    let mut x = x0.to_vec();
    let mut residual = objective.residual(&x);
    let mut rec = Recorder::new(spec, opts.checkpoint_every, residual);
    if opts.iterations == 0 || opts.eps.is_some_and(|e| residual < e) {
        return Ok(rec.records);
    }
    let check_monotone = stepper.method() == SmoothMethod::Method1;
    for k in 1..=opts.iterations {
        let s = spec.draw(rng);
        x = stepper.step(objective, &s, &x)?;
        let next = objective.residual(&x);
        if check_monotone && next > residual + 1e-12 * (1.0 + residual) {
            return Err(Error::Invariant(format!(
                "method 1 increased the objective at iteration {k}: {residual:e} -> {next:e}"
            )));
        }
        residual = next;
        if rec.observe(k, residual, opts)? {
            break;
        }
    }
    Ok(rec.records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, near_singular_3x3};
    use crate::sampling::{seeded_rng, EsoStrategy};

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = seeded_rng(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn method1_identity_zeroes_block() {
        let obj = QuadraticObjective::new(SymmetricMatrix::identity(5), vec![0.0; 5]).unwrap();
        let x = random_vec(5, 1);
        let s = Subset::new(vec![1, 3], 5).unwrap();
        let y = method1_step(&obj, obj.matrix(), &s, &x).unwrap();
        assert_eq!(y[1], 0.0);
        assert_eq!(y[3], 0.0);
        for i in [0, 2, 4] {
            assert_eq!(y[i], x[i]);
        }
    }

    #[test]
    fn method1_full_subset_lands_on_minimizer() {
        let m = near_singular_3x3();
        let obj = QuadraticObjective::new(m.clone(), vec![0.3, -0.2, 0.5]).unwrap();
        let y = method1_step(&obj, &m, &Subset::full(3), &random_vec(3, 2)).unwrap();
        assert!(obj.residual(&y) < 1e-20, "{}", obj.residual(&y));
    }

    #[test]
    fn method1_beats_grid_on_block() {
        let m = fixtures::random_pd(5, 8);
        let obj = QuadraticObjective::new(m.clone(), random_vec(5, 9)).unwrap();
        let x = random_vec(5, 10);
        let s = Subset::new(vec![0, 1], 5).unwrap();
        let y = method1_step(&obj, &m, &s, &x).unwrap();
        let fy = obj.value(&y);
        let mut best = f64::INFINITY;
        let steps = 401;
        for a in 0..steps {
            for b in 0..steps {
                let mut z = x.clone();
                z[0] = y[0] + (a as f64 / (steps - 1) as f64 - 0.5) * 0.2;
                z[1] = y[1] + (b as f64 / (steps - 1) as f64 - 0.5) * 0.2;
                best = best.min(obj.value(&z));
            }
        }
        assert!(fy <= best + 1e-14, "{fy} vs {best}");
        assert!(best - fy < 1e-5);
    }

    #[test]
    fn method2_serial_is_diagonal_newton() {
        let m = fixtures::random_pd(4, 3);
        let obj = QuadraticObjective::new(m.clone(), random_vec(4, 4)).unwrap();
        let spec = SamplingSpec::serial_uniform(4).unwrap();
        let pre = Method2Preconditioner::new(&m, &spec).unwrap();
        let x = random_vec(4, 5);
        let g = obj.gradient(&x);
        for i in 0..4 {
            let s = Subset::singleton(i, 4).unwrap();
            let y = method2_step(&obj, &pre, &s, &x).unwrap();
            assert!((y[i] - (x[i] - g[i] / m.get(i, i))).abs() < 1e-13);
        }
    }

    #[test]
    fn method2_identity_matches_method1() {
        let m = SymmetricMatrix::identity(6);
        let obj = QuadraticObjective::new(m.clone(), random_vec(6, 6)).unwrap();
        let spec = SamplingSpec::tau_nice(6, 3).unwrap();
        let pre = Method2Preconditioner::new(&m, &spec).unwrap();
        let x = random_vec(6, 7);
        let s = Subset::new(vec![0, 2, 5], 6).unwrap();
        let a = method1_step(&obj, &m, &s, &x).unwrap();
        let b = method2_step(&obj, &pre, &s, &x).unwrap();
        assert!(close(&a, &b, 1e-14));
    }

    /// Gaussian elimination with partial pivoting, independent of linalg.
    fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for c in 0..n {
            let p = (c..n)
                .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
                .unwrap();
            a.swap(c, p);
            b.swap(c, p);
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    #[test]
    fn method2_full_subset_matches_direct_solve() {
        let m = fixtures::random_pd(5, 12);
        let obj = QuadraticObjective::new(m.clone(), random_vec(5, 13)).unwrap();
        let spec = SamplingSpec::tau_nice(5, 2).unwrap();
        let pre = Method2Preconditioner::new(&m, &spec).unwrap();
        let x = random_vec(5, 14);
        let g = obj.gradient(&x);
        let e = spec.expected_submatrix_enumerated(&m).unwrap();
        let rhs: Vec<f64> = g.iter().map(|g| 0.4 * g).collect();
        let h = gauss_solve(e.to_rows(), rhs);
        let y = method2_step(&obj, &pre, &Subset::full(5), &x).unwrap();
        let want: Vec<f64> = x.iter().zip(&h).map(|(x, h)| x - h).collect();
        assert!(close(&y, &want, 1e-12));
    }

    #[test]
    fn method3_example_halves_gradient() {
        let m = near_singular_3x3();
        let obj = QuadraticObjective::new(m, vec![0.0; 3]).unwrap();
        let x = vec![1.0, -2.0, 0.5];
        let g = obj.gradient(&x);
        let s = Subset::new(vec![0, 2], 3).unwrap();
        let y = method3_step(&obj, &[2.0; 3], &s, &x).unwrap();
        assert_eq!(y[1], x[1]);
        assert!((y[0] - (x[0] - g[0] / 2.0)).abs() < 1e-15);
        assert!((y[2] - (x[2] - g[2] / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn methods_coincide_at_tau_one() {
        let m = fixtures::random_pd(6, 20);
        let obj = QuadraticObjective::new(m.clone(), random_vec(6, 21)).unwrap();
        let spec = SamplingSpec::tau_nice(6, 1).unwrap();
        let v = spec.eso_vector(&m, EsoStrategy::CertifiedScaling).unwrap();
        let steppers: Vec<SmoothStepper> = [
            SmoothMethod::Method1,
            SmoothMethod::Method2,
            SmoothMethod::Method3,
        ]
        .into_iter()
        .map(|k| SmoothStepper::new(k, &m, &spec, Some(&v)).unwrap())
        .collect();
        let mut xs = vec![random_vec(6, 22); 3];
        let mut rng = seeded_rng(23);
        for _ in 0..200 {
            let s = spec.draw(&mut rng);
            for (x, st) in xs.iter_mut().zip(&steppers) {
                *x = st.step(&obj, &s, x).unwrap();
            }
            assert!(close(&xs[0], &xs[1], 1e-12));
            assert!(close(&xs[0], &xs[2], 1e-12));
        }
    }

    #[test]
    fn run_identity_converges_and_is_monotone() {
        let m = SymmetricMatrix::identity(8);
        let obj = QuadraticObjective::new(m.clone(), random_vec(8, 30)).unwrap();
        let spec = SamplingSpec::tau_nice(8, 2).unwrap();
        let st = SmoothStepper::new(SmoothMethod::Method1, &m, &spec, None).unwrap();
        let trace = run_smooth(
            &st,
            &obj,
            &spec,
            &[0.0; 8],
            &RunOptions::new(200, 1),
            &mut seeded_rng(1),
        )
        .unwrap();
        assert!(trace.windows(2).all(|w| w[1].residual <= w[0].residual));
        assert!(trace.last().unwrap().residual < 1e-28);
        assert_eq!(trace[4].epoch, 1.0);
    }

    #[test]
    fn run_is_deterministic_and_honours_eps() {
        let m = fixtures::random_pd(6, 40);
        let obj = QuadraticObjective::new(m.clone(), random_vec(6, 41)).unwrap();
        let spec = SamplingSpec::tau_nice(6, 2).unwrap();
        let v = spec.eso_vector(&m, EsoStrategy::CertifiedScaling).unwrap();
        for method in [
            SmoothMethod::Method1,
            SmoothMethod::Method2,
            SmoothMethod::Method3,
        ] {
            let st = SmoothStepper::new(method, &m, &spec, Some(&v)).unwrap();
            let opts = RunOptions::new(100_000, 10).with_eps(1e-10);
            let a = run_smooth(&st, &obj, &spec, &[0.0; 6], &opts, &mut seeded_rng(5)).unwrap();
            let b = run_smooth(&st, &obj, &spec, &[0.0; 6], &opts, &mut seeded_rng(5)).unwrap();
            assert_eq!(a, b);
            let last = a.last().unwrap();
            assert!(last.residual < 1e-10);
            assert!(last.iteration < 100_000);
        }
    }

    #[test]
    fn zero_iterations_records_start_only() {
        let m = SymmetricMatrix::identity(3);
        let obj = QuadraticObjective::new(m.clone(), vec![1.0; 3]).unwrap();
        let spec = SamplingSpec::tau_nice(3, 1).unwrap();
        let st = SmoothStepper::new(SmoothMethod::Method1, &m, &spec, None).unwrap();
        let t = run_smooth(
            &st,
            &obj,
            &spec,
            &[0.0; 3],
            &RunOptions::new(0, 1),
            &mut seeded_rng(0),
        )
        .unwrap();
        assert_eq!(t.len(), 1);
        assert!((t[0].residual - 1.5).abs() < 1e-15);
    }

    #[test]
    fn invalid_v_trips_divergence_guard() {
        let m = near_singular_3x3();
        let obj = QuadraticObjective::new(m.clone(), vec![1.0, 2.0, 3.0]).unwrap();
        let spec = SamplingSpec::tau_nice(3, 3).unwrap();
        let st = SmoothStepper::new(SmoothMethod::Method3, &m, &spec, Some(&[0.1; 3])).unwrap();
        let err = run_smooth(
            &st,
            &obj,
            &spec,
            &[0.0; 3],
            &RunOptions::new(1000, 1),
            &mut seeded_rng(0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }

    #[test]
    fn method2_refuses_huge_dimension() {
        let n = METHOD2_MAX_DIM + 1;
        let m = SymmetricMatrix::identity(n);
        let spec = SamplingSpec::tau_nice(n, 1).unwrap();
        assert!(matches!(
            Method2Preconditioner::new(&m, &spec),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn quadratic_satisfies_curvature_bounds() {
        let m = fixtures::random_pd(5, 50);
        let obj = QuadraticObjective::new(m, random_vec(5, 51)).unwrap();
        let mut rng = seeded_rng(52);
        for _ in 0..100 {
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let h: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let xh: Vec<f64> = x.iter().zip(&h).map(|(a, b)| a + b).collect();
            let lin = obj.value(&x) + linalg::dot(&obj.gradient(&x), &h);
            let upper = lin + 0.5 * obj.smoothness().quad_form(&h);
            let lower = lin + 0.5 * obj.strong_convexity().quad_form(&h);
            let f = obj.value(&xh);
            let tol = 1e-10 * (1.0 + f.abs());
            assert!(f <= upper + tol && f >= lower - tol);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn steps_touch_only_the_block(n in 2usize..8, t in 1usize..8, seed in any::<u64>()) {
                let tau = t.min(n);
                let m = fixtures::random_pd(n, seed);
                let obj = QuadraticObjective::new(m.clone(), random_vec(n, seed ^ 1)).unwrap();
                let spec = SamplingSpec::tau_nice(n, tau).unwrap();
                let v = spec.eso_vector(&m, EsoStrategy::CertifiedScaling).unwrap();
                let x = random_vec(n, seed ^ 2);
                let s = spec.draw(&mut seeded_rng(seed));
                for method in [SmoothMethod::Method1, SmoothMethod::Method2, SmoothMethod::Method3] {
                    let st = SmoothStepper::new(method, &m, &spec, Some(&v)).unwrap();
                    let y = st.step(&obj, &s, &x).unwrap();
                    for i in 0..n {
                        if !s.contains(i) {
                            prop_assert_eq!(y[i], x[i]);
                        }
                    }
                }
                let y = method1_step(&obj, &m, &s, &x).unwrap();
                prop_assert!(obj.value(&y) <= obj.value(&x) + 1e-12 * (1.0 + obj.value(&x).abs()));
            }
        }
    }
}
