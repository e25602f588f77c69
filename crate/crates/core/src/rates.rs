//! Linear convergence-rate constants and the orderings between them.
//!
//! Every generalized eigenvalue `lambda_min(X^{-1} Y)` is evaluated in the
//! symmetric form `lambda_min(Y^{1/2} X^{-1} Y^{1/2})`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SymmetricMatrix};
use crate::sampling::{EsoStrategy, PseudoinverseMode, SamplingSpec};

/// Slack allowed when checking the proven orderings.
pub const ORDERING_TOL: f64 = 1e-10;

fn check_dims(m: &SymmetricMatrix, g: &SymmetricMatrix, spec: &SamplingSpec) -> Result<()> {
    for d in [m.dim(), g.dim()] {
        if d != spec.n() {
            return Err(Error::DimensionMismatch {
                expected: spec.n(),
                got: d,
            });
        }
    }
    Ok(())
}

/// `lambda_min(R inner R)` with `R = outer^{1/2}`.
fn sandwiched_min(inner: &SymmetricMatrix, outer: &SymmetricMatrix) -> Result<f64> {
    let root = linalg::sqrt_psd(outer)?;
    linalg::smallest_eigenvalue(&inner.congruence(&root))
}

fn uniform_tau(spec: &SamplingSpec) -> Result<f64> {
    if !spec.is_uniform() {
        return Err(Error::NonUniformSampling);
    }
    spec.validate()?;
    Ok(spec.expected_size())
}

/// Method 1 rate: `lambda_min(G^{1/2} E[(M_S)^dagger] G^{1/2})`, by exact
/// enumeration.
pub fn sigma1(m: &SymmetricMatrix, g: &SymmetricMatrix, spec: &SamplingSpec) -> Result<f64> {
    sigma1_with_mode(m, g, spec, PseudoinverseMode::ExactEnumeration).map(|(s, _)| s)
}

/// As [`sigma1`]; also returns the Monte Carlo sample count when the
/// expectation was estimated rather than enumerated.
pub fn sigma1_with_mode(
    m: &SymmetricMatrix,
    g: &SymmetricMatrix,
    spec: &SamplingSpec,
    mode: PseudoinverseMode,
) -> Result<(f64, Option<usize>)> {
    check_dims(m, g, spec)?;
    spec.validate()?;
    let e = spec.expected_pseudoinverse(m, mode)?;
    Ok((sandwiched_min(&e.matrix, g)?, e.monte_carlo_samples))
}

/// Method 2 rate: `lambda_min(G^{1/2} D(p) E[M_S]^{-1} D(p) G^{1/2})`.
pub fn sigma2(m: &SymmetricMatrix, g: &SymmetricMatrix, spec: &SamplingSpec) -> Result<f64> {
    check_dims(m, g, spec)?;
    let p = spec.probability_vector()?.p;
    let inv = linalg::inverse_spd(&spec.expected_submatrix(m)?)?;
    sandwiched_min(&inv.diag_congruence(&p), g)
}

/// Method 3 rate: `lambda_min(G^{1/2} D(p) D(v)^{-1} G^{1/2})`.
pub fn sigma3(
    m: &SymmetricMatrix,
    g: &SymmetricMatrix,
    spec: &SamplingSpec,
    v: &[f64],
) -> Result<f64> {
    check_dims(m, g, spec)?;
    check_vector(v, spec.n(), "v")?;
    let p = spec.probability_vector()?.p;
    let d: Vec<f64> = p.iter().zip(v).map(|(p, v)| p / v).collect();
    sandwiched_min(&SymmetricMatrix::from_diagonal(&d), g)
}

fn check_vector(v: &[f64], n: usize, what: &str) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "{what} has non-finite entries"
        )));
    }
    Ok(())
}

fn prox_rate(tau: f64, n: usize, s: f64) -> f64 {
    tau * s.min(1.0) / n as f64
}

/// Proximal Method 1 rate `(tau/n) min(1, s1)` with
/// `s1 = lambda_min[((n/tau) E[M_S] + D(gamma))^{-1} (D(gamma) + G)]`.
/// `G = 0` is accepted as long as `D(gamma) + G` is positive definite.
pub fn sigma1_prox(
    m: &SymmetricMatrix,
    g: &SymmetricMatrix,
    gamma: &[f64],
    spec: &SamplingSpec,
) -> Result<f64> {
    check_dims(m, g, spec)?;
    check_vector(gamma, spec.n(), "gamma")?;
    let tau = uniform_tau(spec)?;
    let n = spec.n();
    let x = spec
        .expected_submatrix(m)?
        .scaled(n as f64 / tau)
        .add_diagonal(gamma);
    let y = g.add_diagonal(gamma);
    if !(linalg::smallest_eigenvalue(&y)? > 0.0) {
        return Err(Error::InvalidArgument(
            "D(gamma) + G must be positive definite".into(),
        ));
    }
    let s1 = sandwiched_min(&linalg::inverse_spd(&x)?, &y)?;
    Ok(prox_rate(tau, n, s1))
}

/// PCDM rate `(tau/n) min(1, s3)` with `s3 = lambda_min[D(v + gamma)^{-1} (D(gamma) + G)]`.
pub fn sigma3_prox(
    m: &SymmetricMatrix,
    g: &SymmetricMatrix,
    gamma: &[f64],
    v: &[f64],
    spec: &SamplingSpec,
) -> Result<f64> {
    check_dims(m, g, spec)?;
    check_vector(gamma, spec.n(), "gamma")?;
    check_vector(v, spec.n(), "v")?;
    let tau = uniform_tau(spec)?;
    let inv: Vec<f64> = v.iter().zip(gamma).map(|(v, g)| 1.0 / (v + g)).collect();
    let s3 = sandwiched_min(
        &SymmetricMatrix::from_diagonal(&inv),
        &g.add_diagonal(gamma),
    )?;
    Ok(prox_rate(tau, spec.n(), s3))
}

/// `theta = min_i p_i lambda gamma n / (v_i + lambda gamma n)`, where `v`
/// is an ESO vector for `A^T A`.
pub fn theta(spec: &SamplingSpec, v: &[f64], lambda: f64, gamma_loss: f64) -> Result<f64> {
    check_vector(v, spec.n(), "v")?;
    if !(lambda > 0.0 && gamma_loss > 0.0) {
        return Err(Error::InvalidArgument(
            "lambda and gamma must be positive".into(),
        ));
    }
    let p = spec.probability_vector()?.p;
    let c = lambda * gamma_loss * spec.n() as f64;
    Ok(p.iter()
        .zip(v)
        .map(|(p, v)| p * c / (v + c))
        .fold(f64::INFINITY, f64::min))
}

fn check_gram(gram: &SymmetricMatrix, spec: &SamplingSpec) -> Result<()> {
    if gram.dim() != spec.n() {
        return Err(Error::DimensionMismatch {
            expected: spec.n(),
            got: gram.dim(),
        });
    }
    Ok(())
}

/// SDNA rate for general smooth losses, from the Gram matrix `A^T A`:
/// `(tau/n) min(1, s1)` with `s1 = 1 / lambda_max((1/(tau gamma lambda)) E[(A^T A)_S] + I)`.
pub fn erm_sigma1_prox(
    gram: &SymmetricMatrix,
    lambda: f64,
    gamma_loss: f64,
    spec: &SamplingSpec,
) -> Result<f64> {
    check_gram(gram, spec)?;
    let tau = uniform_tau(spec)?;
    let e = spec.expected_submatrix(gram)?;
    let shifted = e
        .scaled(1.0 / (tau * gamma_loss * lambda))
        .add_diagonal(&vec![1.0; spec.n()]);
    let s1 = 1.0 / linalg::largest_eigenvalue(&shifted)?;
    Ok(prox_rate(tau, spec.n(), s1))
}

/// SDNA rate for quadratic loss: `lambda_min(E[(H_S)^dagger] H)` with
/// `H = (1/(lambda n)) A^T A + gamma I`.
pub fn erm_sigma1_quadratic(
    gram: &SymmetricMatrix,
    lambda: f64,
    gamma_loss: f64,
    spec: &SamplingSpec,
) -> Result<f64> {
    erm_sigma1_quadratic_with_mode(
        gram,
        lambda,
        gamma_loss,
        spec,
        PseudoinverseMode::ExactEnumeration,
    )
    .map(|(s, _)| s)
}

pub fn erm_sigma1_quadratic_with_mode(
    gram: &SymmetricMatrix,
    lambda: f64,
    gamma_loss: f64,
    spec: &SamplingSpec,
    mode: PseudoinverseMode,
) -> Result<(f64, Option<usize>)> {
    check_gram(gram, spec)?;
    let h = dual_hessian(gram, lambda, gamma_loss);
    sigma1_with_mode(&h, &h, spec, mode)
}

/// `(1/(lambda n)) A^T A + gamma I`, the dual Hessian scaled by `n`.
pub fn dual_hessian(gram: &SymmetricMatrix, lambda: f64, gamma_loss: f64) -> SymmetricMatrix {
    let n = gram.dim();
    gram.scaled(1.0 / (lambda * n as f64))
        .add_diagonal(&vec![gamma_loss; n])
}

/// `sigma2` predicted from `sigma3` for tau-nice sampling with `G = M` and
/// `v = beta diag(M)`.
pub fn tau_nice_sigma2_relation(beta: f64, sigma3: f64, n: usize, tau: usize) -> f64 {
    let alpha = if n > 1 {
        (tau as f64 - 1.0) / (n as f64 - 1.0)
    } else {
        0.0
    };
    let ratio = n as f64 / tau as f64;
    beta * sigma3 / ((1.0 - alpha) + ratio * alpha * beta * sigma3)
}

/// Results of the proven orderings, each checked with [`ORDERING_TOL`] slack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingChecks {
    /// `0 < sigma3 <= sigma2 <= sigma1 <= 1`.
    pub smooth_chain: bool,
    /// `sigma3_prox <= sigma1_prox`; `None` for non-uniform samplings.
    pub prox_chain: Option<bool>,
    /// `theta <= erm sigma1_prox <= erm sigma1`; `None` without ERM data.
    pub erm_chain: Option<bool>,
}

impl OrderingChecks {
    pub fn all_hold(&self) -> bool {
        self.smooth_chain && self.prox_chain.unwrap_or(true) && self.erm_chain.unwrap_or(true)
    }
}

/// Rates of SDNA and minibatch SDCA on an ERM instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErmRates {
    pub lambda: f64,
    pub gamma_loss: f64,
    /// ESO vector for `A^T A` used by `theta`.
    pub v: Vec<f64>,
    pub theta: f64,
    pub sigma1_prox: f64,
    pub sigma1_quadratic: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub context: String,
    pub sampling: SamplingSpec,
    pub v: Vec<f64>,
    pub gamma: Vec<f64>,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
    pub sigma1_prox: Option<f64>,
    pub sigma3_prox: Option<f64>,
    pub theta: Option<f64>,
    pub erm: Option<ErmRates>,
    /// False when an expectation was estimated by Monte Carlo.
    pub certified: bool,
    pub monte_carlo_samples: Option<usize>,
    pub checks: OrderingChecks,
}

/// Inputs for [`RateReport::compute`].
#[derive(Clone, Debug)]
pub struct RateInputs<'a> {
    pub context: String,
    pub m: &'a SymmetricMatrix,
    pub g: &'a SymmetricMatrix,
    pub gamma: Vec<f64>,
    /// ESO vector for `M`; the certified-scaling vector when `None`.
    pub v: Option<Vec<f64>>,
    pub spec: &'a SamplingSpec,
    pub mode: PseudoinverseMode,
    pub erm: Option<ErmInputs<'a>>,
}

#[derive(Clone, Debug)]
pub struct ErmInputs<'a> {
    pub gram: &'a SymmetricMatrix,
    pub lambda: f64,
    pub gamma_loss: f64,
}

impl RateReport {
    pub fn compute(inputs: RateInputs<'_>) -> Result<Self> {
        let RateInputs {
            context,
            m,
            g,
            gamma,
            v,
            spec,
            mode,
            erm,
        } = inputs;
        let v = match v {
            Some(v) => v,
            None => spec.eso_vector(m, EsoStrategy::CertifiedScaling)?,
        };
        let (s1, mut samples) = sigma1_with_mode(m, g, spec, mode)?;
        let s2 = sigma2(m, g, spec)?;
        let s3 = sigma3(m, g, spec, &v)?;
        let (s1p, s3p) = if spec.is_uniform() {
            (
                Some(sigma1_prox(m, g, &gamma, spec)?),
                Some(sigma3_prox(m, g, &gamma, &v, spec)?),
            )
        } else {
            (None, None)
        };
        let erm = match erm {
            Some(e) => {
                let v_erm = spec.eso_vector(e.gram, EsoStrategy::CertifiedScaling)?;
                let (q, erm_samples) =
                    erm_sigma1_quadratic_with_mode(e.gram, e.lambda, e.gamma_loss, spec, mode)?;
                samples = samples.or(erm_samples);
                Some(ErmRates {
                    lambda: e.lambda,
                    gamma_loss: e.gamma_loss,
                    theta: theta(spec, &v_erm, e.lambda, e.gamma_loss)?,
                    sigma1_prox: erm_sigma1_prox(e.gram, e.lambda, e.gamma_loss, spec)?,
                    sigma1_quadratic: q,
                    v: v_erm,
                })
            }
            None => None,
        };
        let tol = ORDERING_TOL;
        let checks = OrderingChecks {
            smooth_chain: s3 > 0.0 && s3 <= s2 + tol && s2 <= s1 + tol && s1 <= 1.0 + tol,
            prox_chain: s1p.zip(s3p).map(|(a, b)| b <= a + tol),
            erm_chain: erm.as_ref().map(|e| {
                e.theta <= e.sigma1_prox + tol && e.sigma1_prox <= e.sigma1_quadratic + tol
            }),
        };
        Ok(Self {
            context,
            sampling: spec.clone(),
            theta: erm.as_ref().map(|e| e.theta),
            v,
            gamma,
            sigma1: s1,
            sigma2: s2,
            sigma3: s3,
            sigma1_prox: s1p,
            sigma3_prox: s3p,
            erm,
            certified: samples.is_none(),
            monte_carlo_samples: samples,
            checks,
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("rate reports always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, near_singular_3x3};
    use crate::sampling::seeded_rng;
    use rand::Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn example_rates() {
        let m = near_singular_3x3();
        let spec = SamplingSpec::tau_nice(3, 2).unwrap();
        let s1 = sigma1(&m, &m, &spec).unwrap();
        let s2 = sigma2(&m, &m, &spec).unwrap();
        let s3 = sigma3(&m, &m, &spec, &[2.0; 3]).unwrap();
        assert!(rel(s1, 0.3350) < 1e-3, "{s1}");
        assert!(rel(s2, 1.333e-4) < 1e-2, "{s2}");
        assert!(rel(s3, 0.333e-4) < 1e-2, "{s3}");
        let predicted = tau_nice_sigma2_relation(2.0, s3, 3, 2);
        assert!(rel(predicted, 1.333e-4) < 1e-2);
        assert!((predicted - s2).abs() < 1e-10);
    }

    #[test]
    fn identity_rates_are_tau_over_n() {
        for (n, tau) in [(4, 1), (4, 2), (5, 5), (6, 3)] {
            let i = SymmetricMatrix::identity(n);
            let spec = SamplingSpec::tau_nice(n, tau).unwrap();
            let want = tau as f64 / n as f64;
            let ones = vec![1.0; n];
            let zeros = vec![0.0; n];
            assert!((sigma1(&i, &i, &spec).unwrap() - want).abs() < 1e-14);
            assert!((sigma2(&i, &i, &spec).unwrap() - want).abs() < 1e-14);
            assert!((sigma3(&i, &i, &spec, &ones).unwrap() - want).abs() < 1e-14);
            assert!((sigma1_prox(&i, &i, &zeros, &spec).unwrap() - want).abs() < 1e-14);
            assert!((sigma3_prox(&i, &i, &zeros, &ones, &spec).unwrap() - want).abs() < 1e-14);
        }
    }

    #[test]
    fn sigma1_matches_similarity_form() {
        let m = fixtures::random_pd(4, 31);
        let g = fixtures::dominated_pd(&m, 32);
        let spec = SamplingSpec::tau_nice(4, 2).unwrap();
        let e = spec
            .expected_pseudoinverse(&m, PseudoinverseMode::ExactEnumeration)
            .unwrap()
            .matrix;
        // lambda_min(E^{1/2} G E^{1/2}) shares the spectrum of G^{1/2} E G^{1/2}
        let root = linalg::sqrt_psd(&e).unwrap();
        let other = linalg::smallest_eigenvalue(&g.congruence(&root)).unwrap();
        let s1 = sigma1(&m, &g, &spec).unwrap();
        assert!((s1 - other).abs() < 1e-12 * (1.0 + s1.abs()));
    }

    #[test]
    fn prox_rate_zero_gamma_closed_form() {
        for seed in 0..10 {
            let m = fixtures::random_pd(5, seed);
            let spec = SamplingSpec::tau_nice(5, 3).unwrap();
            let (n, tau): (f64, f64) = (5.0, 3.0);
            let got = sigma1_prox(&m, &m, &[0.0; 5], &spec).unwrap();
            let inv = linalg::inverse_spd(&spec.expected_submatrix(&m).unwrap()).unwrap();
            let root = linalg::sqrt_psd(&m).unwrap();
            let lmin = linalg::smallest_eigenvalue(&inv.congruence(&root)).unwrap();
            let want = (tau / n).min(tau * tau / (n * n) * lmin);
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    /// Brute force: minimize the generalized Rayleigh quotient over a dense
    /// sample of directions, refined by coordinate-wise golden search.
    fn brute_force_s3(y: &SymmetricMatrix, d: &[f64]) -> f64 {
        let n = d.len();
        let quotient = |h: &[f64]| {
            let num = y.quad_form(h);
            let den: f64 = h.iter().zip(d).map(|(h, d)| d * h * h).sum();
            num / den
        };
        let mut rng = seeded_rng(99);
        let mut best: Vec<f64> = vec![1.0; n];
        let mut best_q = quotient(&best);
        for _ in 0..20_000 {
            let h: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let q = quotient(&h);
            if q < best_q {
                best_q = q;
                best = h;
            }
        }
        for _ in 0..200 {
            for i in 0..n {
                let (mut lo, mut hi) = (best[i] - 2.0, best[i] + 2.0);
                let phi = 0.5 * (5f64.sqrt() - 1.0);
                for _ in 0..80 {
                    let a = hi - phi * (hi - lo);
                    let b = lo + phi * (hi - lo);
                    let mut ha = best.clone();
                    ha[i] = a;
                    let mut hb = best.clone();
                    hb[i] = b;
                    if quotient(&ha) < quotient(&hb) {
                        hi = b;
                    } else {
                        lo = a;
                    }
                }
                best[i] = 0.5 * (lo + hi);
            }
        }
        quotient(&best)
    }

    #[test]
    fn sigma3_prox_matches_rayleigh_brute_force() {
        let m = fixtures::random_pd(4, 5);
        let g = fixtures::dominated_pd(&m, 6);
        let spec = SamplingSpec::tau_nice(4, 2).unwrap();
        let v = spec.eso_vector(&m, EsoStrategy::CertifiedScaling).unwrap();
        let gamma = [0.3, 0.0, 0.1, 0.5];
        let y = g.add_diagonal(&gamma);
        let d: Vec<f64> = v.iter().zip(&gamma).map(|(v, g)| v + g).collect();
        let s3 = brute_force_s3(&y, &d);
        let want = 0.5 * s3.min(1.0);
        let got = sigma3_prox(&m, &g, &gamma, &v, &spec).unwrap();
        assert!((got - want).abs() < 1e-6 * want, "{got} vs {want}");
    }

    #[test]
    fn prox_rates_reject_non_uniform() {
        let m = fixtures::random_pd(3, 1);
        let spec = SamplingSpec::explicit(3, vec![(vec![0, 1], 0.5), (vec![1, 2], 0.5)]).unwrap();
        assert!(matches!(
            sigma1_prox(&m, &m, &[0.0; 3], &spec),
            Err(Error::NonUniformSampling)
        ));
        assert!(sigma1(&m, &m, &spec).is_ok());
    }

    #[test]
    fn theta_limits() {
        let spec = SamplingSpec::tau_nice(10, 4).unwrap();
        let (lambda, gamma) = (0.1, 1.0);
        let c = lambda * gamma * 10.0;
        let t = theta(&spec, &[c; 10], lambda, gamma).unwrap();
        assert!((t - 4.0 / 20.0).abs() < 1e-15);
        let t = theta(&spec, &[1e-14; 10], lambda, gamma).unwrap();
        assert!((t - 0.4).abs() < 1e-12);
    }

    #[test]
    fn erm_prox_zero_data() {
        let gram = SymmetricMatrix::zeros(6);
        let spec = SamplingSpec::tau_nice(6, 2).unwrap();
        let r = erm_sigma1_prox(&gram, 0.1, 1.0, &spec).unwrap();
        assert!((r - 2.0 / 6.0).abs() < 1e-15);
        let q = erm_sigma1_quadratic(&gram, 0.1, 1.0, &spec).unwrap();
        assert!((q - 2.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn erm_prox_scaled_identity_gram() {
        // A^T A = c I: E[(A^T A)_S] = (tau/n) c I, computed here by enumeration.
        let (n, tau, c, lambda, gamma) = (6, 3, 2.5, 1.0 / 6.0, 1.0);
        let gram = SymmetricMatrix::identity(n).scaled(c);
        let spec = SamplingSpec::tau_nice(n, tau).unwrap();
        let e = spec.expected_submatrix_enumerated(&gram).unwrap();
        let lmax = linalg::largest_eigenvalue(&e).unwrap();
        let s1 = 1.0 / (lmax / (tau as f64 * gamma * lambda) + 1.0);
        let want = tau as f64 / n as f64 * s1.min(1.0);
        let got = erm_sigma1_prox(&gram, lambda, gamma, &spec).unwrap();
        assert!((got - want).abs() < 1e-14);
        let closed = tau as f64 / n as f64 / (1.0 + c / (gamma * lambda * n as f64));
        assert!((got - closed).abs() < 1e-14);
    }

    #[test]
    fn erm_prox_matches_generic_reduction() {
        // M = A^T A / (lambda n^2), G = 0, gamma_i = gamma / n
        let (n, lambda, gamma) = (6, 0.2, 1.0);
        let gram = fixtures::random_pd(n, 17);
        let spec = SamplingSpec::tau_nice(n, 2).unwrap();
        let m = gram.scaled(1.0 / (lambda * (n * n) as f64));
        let generic = sigma1_prox(
            &m,
            &SymmetricMatrix::zeros(n),
            &vec![gamma / n as f64; n],
            &spec,
        )
        .unwrap();
        let direct = erm_sigma1_prox(&gram, lambda, gamma, &spec).unwrap();
        assert!((generic - direct).abs() < 1e-12);
    }

    #[test]
    fn erm_quadratic_reduces_to_smooth_sigma1() {
        // gamma = 1, lambda n = 1: H = A^T A + I; pick A^T A = M - I for the 3x3 fixture
        // shifted so it stays PSD.
        let m = near_singular_3x3().add_diagonal(&[1.0; 3]);
        let gram = m.add_diagonal(&[-1.0; 3]);
        let spec = SamplingSpec::tau_nice(3, 2).unwrap();
        let q = erm_sigma1_quadratic(&gram, 1.0 / 3.0, 1.0, &spec).unwrap();
        let s = sigma1(&m, &m, &spec).unwrap();
        assert!((q - s).abs() < 1e-12);
        let example = near_singular_3x3();
        let gram = example.add_diagonal(&[-0.5; 3]).scaled(1.0);
        let q = erm_sigma1_quadratic(&gram, 1.0 / 3.0, 0.5, &spec).unwrap();
        assert!((q - sigma1(&example, &example, &spec).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn relation_at_tau_one() {
        assert_eq!(tau_nice_sigma2_relation(1.0, 0.25, 7, 1), 0.25);
    }

    #[test]
    fn report_on_example() {
        let m = near_singular_3x3();
        let spec = SamplingSpec::tau_nice(3, 2).unwrap();
        let report = RateReport::compute(RateInputs {
            context: "example".into(),
            m: &m,
            g: &m,
            gamma: vec![0.0; 3],
            v: Some(vec![2.0; 3]),
            spec: &spec,
            mode: PseudoinverseMode::ExactEnumeration,
            erm: None,
        })
        .unwrap();
        assert!(report.certified);
        assert!(report.checks.all_hold());
        let back: RateReport = serde_json::from_str(&report.to_json_pretty()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn report_flags_monte_carlo() {
        let m = fixtures::random_pd(5, 3);
        let spec = SamplingSpec::tau_nice(5, 2).unwrap();
        let report = RateReport::compute(RateInputs {
            context: "mc".into(),
            m: &m,
            g: &m,
            gamma: vec![0.0; 5],
            v: None,
            spec: &spec,
            mode: PseudoinverseMode::MonteCarlo {
                samples: 20_000,
                seed: 1,
            },
            erm: None,
        })
        .unwrap();
        assert!(!report.certified);
        assert_eq!(report.monte_carlo_samples, Some(20_000));
        let exact = sigma1(&m, &m, &spec).unwrap();
        assert!(rel(report.sigma1, exact) < 0.05);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn scale_invariance(n in 2usize..6, t in 1usize..6, seed in any::<u64>(), c in 0.01f64..100.0) {
                let tau = t.min(n);
                let m = fixtures::random_pd(n, seed);
                let spec = SamplingSpec::tau_nice(n, tau).unwrap();
                let v = spec.eso_vector(&m, EsoStrategy::CertifiedScaling).unwrap();
                let mc = m.scaled(c);
                let vc: Vec<f64> = v.iter().map(|x| x * c).collect();
                let pairs = [
                    (sigma1(&m, &m, &spec).unwrap(), sigma1(&mc, &mc, &spec).unwrap()),
                    (sigma2(&m, &m, &spec).unwrap(), sigma2(&mc, &mc, &spec).unwrap()),
                    (sigma3(&m, &m, &spec, &v).unwrap(), sigma3(&mc, &mc, &spec, &vc).unwrap()),
                ];
                for (a, b) in pairs {
                    prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12), "{} vs {}", a, b);
                }
            }

            #[test]
            fn orderings_hold(n in 2usize..7, t in 1usize..7, seed in any::<u64>()) {
                let tau = t.min(n);
                let m = fixtures::random_pd(n, seed);
                let g = fixtures::dominated_pd(&m, seed ^ 0x55);
                let spec = SamplingSpec::tau_nice(n, tau).unwrap();
                let gamma: Vec<f64> = (0..n).map(|i| 0.1 * i as f64).collect();
                let report = RateReport::compute(RateInputs {
                    context: String::new(),
                    m: &m,
                    g: &g,
                    gamma,
                    v: None,
                    spec: &spec,
                    mode: PseudoinverseMode::ExactEnumeration,
                    erm: Some(ErmInputs { gram: &m, lambda: 0.3, gamma_loss: 1.0 }),
                }).unwrap();
                prop_assert!(report.checks.all_hold(), "{:?}", report);
            }

            #[test]
            fn relation_matches_direct_sigma2(n in 2usize..7, t in 1usize..7, seed in any::<u64>()) {
                let tau = t.min(n);
                let m = fixtures::random_pd(n, seed);
                let spec = SamplingSpec::tau_nice(n, tau).unwrap();
                let v = spec.eso_vector(&m, EsoStrategy::CertifiedScaling).unwrap();
                let beta = v[0] / m.get(0, 0);
                let s3 = sigma3(&m, &m, &spec, &v).unwrap();
                let s2 = sigma2(&m, &m, &spec).unwrap();
                prop_assert!((tau_nice_sigma2_relation(beta, s3, n, tau) - s2).abs() < 1e-10);
            }
        }
    }
}
