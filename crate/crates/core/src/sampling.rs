//! Random coordinate subsets ("samplings") and the expectations over them
//! that the rate constants and the ESO step sizes are built from.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky, Subset, SymmetricMatrix};

/// Counter-based seeded stream used by every solver and sampler.
pub type SolverRng = ChaCha8Rng;

/// Largest support that exact enumeration will walk.
pub const ENUMERATION_CAP: usize = 1_000_000;

pub fn seeded_rng(seed: u64) -> SolverRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn split_rng(seed: u64, stream: u64) -> SolverRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub set: Subset,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SamplingKind {
    /// Uniform over all subsets of cardinality `tau`.
    TauNice {
        tau: usize,
    },
    Explicit {
        atoms: Vec<Atom>,
    },
}

/// A distribution over nonempty subsets of `[0, n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SamplingRepr", into = "SamplingRepr")]
pub struct SamplingSpec {
    n: usize,
    kind: SamplingKind,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SamplingRepr {
    TauNice { n: usize, tau: usize },
    SerialUniform { n: usize },
    Explicit { n: usize, atoms: Vec<AtomRepr> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct AtomRepr {
    set: Vec<usize>,
    prob: f64,
}

impl TryFrom<SamplingRepr> for SamplingSpec {
    type Error = Error;

    fn try_from(repr: SamplingRepr) -> Result<Self> {
        match repr {
            SamplingRepr::TauNice { n, tau } => Self::tau_nice(n, tau),
            SamplingRepr::SerialUniform { n } => Self::serial_uniform(n),
            SamplingRepr::Explicit { n, atoms } => {
                Self::explicit(n, atoms.into_iter().map(|a| (a.set, a.prob)).collect())
            }
        }
    }
}

impl From<SamplingSpec> for SamplingRepr {
    fn from(spec: SamplingSpec) -> Self {
        match spec.kind {
            SamplingKind::TauNice { tau } => SamplingRepr::TauNice { n: spec.n, tau },
            SamplingKind::Explicit { atoms } => SamplingRepr::Explicit {
                n: spec.n,
                atoms: atoms
                    .into_iter()
                    .map(|a| AtomRepr {
                        set: a.set.indices().to_vec(),
                        prob: a.prob,
                    })
                    .collect(),
            },
        }
    }
}

/// Inclusion probabilities `p_i = Prob(i in S)` and `E|S|`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplingStats {
    pub p: Vec<f64>,
    pub tau_expected: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PseudoinverseMode {
    ExactEnumeration,
    MonteCarlo { samples: usize, seed: u64 },
}

/// `E[(M_S)^dagger]`, with the Monte Carlo sample count when estimated.
#[derive(Clone, Debug)]
pub struct ExpectedPseudoinverse {
    pub matrix: SymmetricMatrix,
    pub monte_carlo_samples: Option<usize>,
}

impl ExpectedPseudoinverse {
    pub fn is_exact(&self) -> bool {
        self.monte_carlo_samples.is_none()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EsoStrategy {
    /// `v_i = min(tau, lambda'(M)) M_ii`.
    Conservative,
    /// `v_i = beta M_ii` with the smallest certifiable `beta`.
    CertifiedScaling,
}

impl SamplingSpec {
    pub fn tau_nice(n: usize, tau: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSampling(
                "dimension must be at least 1".into(),
            ));
        }
        if tau == 0 || tau > n {
            return Err(Error::InvalidSampling(format!(
                "tau must lie in [1, {n}], got {tau}"
            )));
        }
        Ok(Self {
            n,
            kind: SamplingKind::TauNice { tau },
        })
    }

    pub fn serial_uniform(n: usize) -> Result<Self> {
        Self::tau_nice(n, 1)
    }

    /// Explicit atoms. Atoms must be nonempty subsets of `[0, n)` with
    /// probabilities summing to one within `1e-12`. Properness is checked by
    /// [`SamplingSpec::probability_vector`].
    pub fn explicit(n: usize, atoms: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSampling(
                "dimension must be at least 1".into(),
            ));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidSampling("no atoms".into()));
        }
        let mut out = Vec::with_capacity(atoms.len());
        let mut total = 0.0;
        for (set, prob) in atoms {
            if !(prob.is_finite() && prob > 0.0) {
                return Err(Error::InvalidSampling(format!(
                    "atom probability must be positive, got {prob}"
                )));
            }
            total += prob;
            out.push(Atom {
                set: Subset::new(set, n)?,
                prob,
            });
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSampling(format!(
                "atom probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self {
            n,
            kind: SamplingKind::Explicit { atoms: out },
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("sampling specs always serialize")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &SamplingKind {
        &self.kind
    }

    /// `tau` for tau-nice samplings, `None` otherwise.
    pub fn tau(&self) -> Option<usize> {
        match self.kind {
            SamplingKind::TauNice { tau } => Some(tau),
            SamplingKind::Explicit { .. } => None,
        }
    }

    /// Almost-sure bound on `|S|`.
    pub fn max_size(&self) -> usize {
        match &self.kind {
            SamplingKind::TauNice { tau } => *tau,
            SamplingKind::Explicit { atoms } => {
                atoms.iter().map(|a| a.set.len()).max().unwrap_or(0)
            }
        }
    }

    pub fn expected_size(&self) -> f64 {
        match &self.kind {
            SamplingKind::TauNice { tau } => *tau as f64,
            SamplingKind::Explicit { atoms } => {
                atoms.iter().map(|a| a.prob * a.set.len() as f64).sum()
            }
        }
    }

    /// All inclusion probabilities equal (within `1e-12`).
    pub fn is_uniform(&self) -> bool {
        match &self.kind {
            SamplingKind::TauNice { .. } => true,
            SamplingKind::Explicit { .. } => {
                let p = self.inclusion_probabilities();
                p.iter().all(|&pi| (pi - p[0]).abs() <= 1e-12)
            }
        }
    }

    /// Number of subsets in the support, saturating.
    pub fn support_size(&self) -> u128 {
        match &self.kind {
            SamplingKind::TauNice { tau } => binomial(self.n, *tau),
            SamplingKind::Explicit { atoms } => atoms.len() as u128,
        }
    }

    /// Enumerates `(subset, probability)` pairs, refusing supports above `cap`.
    pub fn support(&self, cap: usize) -> Result<Vec<(Subset, f64)>> {
        let size = self.support_size();
        if size > cap as u128 {
            return Err(Error::EnumerationCapacity { size, cap });
        }
        Ok(match &self.kind {
            SamplingKind::TauNice { tau } => {
                let prob = 1.0 / size as f64;
                Combinations::new(self.n, *tau)
                    .map(|c| (Subset::from_sorted_unchecked(c, self.n), prob))
                    .collect()
            }
            SamplingKind::Explicit { atoms } => {
                atoms.iter().map(|a| (a.set.clone(), a.prob)).collect()
            }
        })
    }

    /// Draws one subset. Tau-nice draws use Floyd's algorithm so the
    /// sequence depends only on the stream, not on platform word size.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Subset {
        match &self.kind {
            SamplingKind::TauNice { tau } => {
                Subset::from_sorted_unchecked(floyd_sample(self.n, *tau, rng), self.n)
            }
            SamplingKind::Explicit { atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for atom in atoms {
                    acc += atom.prob;
                    if u < acc {
                        return atom.set.clone();
                    }
                }
                atoms.last().expect("validated nonempty").set.clone()
            }
        }
    }

    fn inclusion_probabilities(&self) -> Vec<f64> {
        match &self.kind {
            SamplingKind::TauNice { tau } => vec![*tau as f64 / self.n as f64; self.n],
            SamplingKind::Explicit { atoms } => {
                let mut p = vec![0.0; self.n];
                for atom in atoms {
                    for i in atom.set.iter() {
                        p[i] += atom.prob;
                    }
                }
                p
            }
        }
    }

    pub fn probability_vector(&self) -> Result<SamplingStats> {
        let p = self.inclusion_probabilities();
        if let Some(i) = p.iter().position(|&pi| pi <= 0.0) {
            return Err(Error::ImproperSampling(i));
        }
        Ok(SamplingStats {
            tau_expected: self.expected_size(),
            p,
        })
    }

    /// Checks properness.
    pub fn validate(&self) -> Result<()> {
        self.probability_vector().map(|_| ())
    }

    fn check_matrix(&self, m: &SymmetricMatrix) -> Result<()> {
        if m.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: m.dim(),
            });
        }
        Ok(())
    }

    /// `E[M_S]`. Tau-nice uses the closed form: diagonal weighted by
    /// `tau/n`, off-diagonal by `tau(tau-1)/(n(n-1))`.
    pub fn expected_submatrix(&self, m: &SymmetricMatrix) -> Result<SymmetricMatrix> {
        self.check_matrix(m)?;
        match &self.kind {
            SamplingKind::TauNice { tau } => {
                let (n, t) = (self.n as f64, *tau as f64);
                let diag_w = t / n;
                let off_w = if self.n > 1 {
                    t * (t - 1.0) / (n * (n - 1.0))
                } else {
                    0.0
                };
                Ok(SymmetricMatrix::from_fn(self.n, |i, j| {
                    m.get(i, j) * if i == j { diag_w } else { off_w }
                }))
            }
            SamplingKind::Explicit { atoms } => {
                let mut acc = SymmetricMatrix::zeros(self.n);
                let n = self.n;
                for atom in atoms {
                    let data = acc.data_mut();
                    for i in atom.set.iter() {
                        for j in atom.set.iter() {
                            data[i * n + j] += atom.prob * m.get(i, j);
                        }
                    }
                }
                Ok(acc)
            }
        }
    }

    /// `E[M_S]` by walking the support; independent of the closed form.
    pub fn expected_submatrix_enumerated(&self, m: &SymmetricMatrix) -> Result<SymmetricMatrix> {
        self.check_matrix(m)?;
        let mut acc = SymmetricMatrix::zeros(self.n);
        for (s, prob) in self.support(ENUMERATION_CAP)? {
            acc.add_assign_scaled(&linalg::principal_submatrix(m, &s)?, prob);
        }
        Ok(acc)
    }

    /// `E[(M_S)^dagger]`, exactly over the support or by Monte Carlo.
    pub fn expected_pseudoinverse(
        &self,
        m: &SymmetricMatrix,
        mode: PseudoinverseMode,
    ) -> Result<ExpectedPseudoinverse> {
        self.check_matrix(m)?;
        let mut acc = SymmetricMatrix::zeros(self.n);
        match mode {
            PseudoinverseMode::ExactEnumeration => {
                for (s, prob) in self.support(ENUMERATION_CAP)? {
                    accumulate_block_inverse(&mut acc, m, &s, prob)?;
                }
                Ok(ExpectedPseudoinverse {
                    matrix: acc,
                    monte_carlo_samples: None,
                })
            }
            PseudoinverseMode::MonteCarlo { samples, seed } => {
                if samples == 0 {
                    return Err(Error::InvalidArgument(
                        "monte carlo needs at least one sample".into(),
                    ));
                }
                let mut rng = seeded_rng(seed);
                let w = 1.0 / samples as f64;
                for _ in 0..samples {
                    let s = self.draw(&mut rng);
                    accumulate_block_inverse(&mut acc, m, &s, w)?;
                }
                Ok(ExpectedPseudoinverse {
                    matrix: acc,
                    monte_carlo_samples: Some(samples),
                })
            }
        }
    }

    /// `D(p) D(v) - E[M_S]`.
    pub fn eso_slack(&self, m: &SymmetricMatrix, v: &[f64]) -> Result<SymmetricMatrix> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        let stats = self.probability_vector()?;
        let pv: Vec<f64> = stats.p.iter().zip(v).map(|(p, v)| p * v).collect();
        Ok(SymmetricMatrix::from_diagonal(&pv).sub(&self.expected_submatrix(m)?))
    }

    /// True iff `D(p) D(v) - E[M_S]` is PSD within `tol`.
    pub fn verify_eso(&self, m: &SymmetricMatrix, v: &[f64], tol: f64) -> Result<bool> {
        Ok(linalg::is_psd(&self.eso_slack(m, v)?, tol))
    }

    /// A vector `v` with `E[M_S] <= D(p) D(v)`.
    pub fn eso_vector(&self, m: &SymmetricMatrix, strategy: EsoStrategy) -> Result<Vec<f64>> {
        self.check_matrix(m)?;
        let diag = m.diagonal();
        if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "ESO needs a positive diagonal; entry {i} is {}",
                diag[i]
            )));
        }
        let tau_bound = self.max_size() as f64;
        let v: Vec<f64> = match strategy {
            EsoStrategy::Conservative => {
                let inv_sqrt: Vec<f64> = diag.iter().map(|d| 1.0 / d.sqrt()).collect();
                let lambda_prime = linalg::largest_eigenvalue(&m.diag_congruence(&inv_sqrt))?;
                let factor = tau_bound.min(lambda_prime);
                diag.iter().map(|d| factor * d).collect()
            }
            EsoStrategy::CertifiedScaling => {
                let beta = self.certified_beta(m, &diag, tau_bound)?;
                diag.iter().map(|d| beta * d).collect()
            }
        };
        let tol = ESO_TOL * self.expected_submatrix(m)?.max_abs();
        if !self.verify_eso(m, &v, tol)? {
            return Err(Error::Invariant(format!(
                "{strategy:?} ESO vector failed verification"
            )));
        }
        Ok(v)
    }

    /// Smallest `beta` in `[1, tau]` with `beta D(p) D(M) - E[M_S]` PSD,
    /// i.e. `lambda_max(W E[M_S] W)` for `W = (D(p) D(M))^{-1/2}`, nudged
    /// up by a relative `1e-10` so the certificate survives round-off.
    fn certified_beta(&self, m: &SymmetricMatrix, diag: &[f64], tau_bound: f64) -> Result<f64> {
        let stats = self.probability_vector()?;
        let expected = self.expected_submatrix(m)?;
        let w: Vec<f64> = stats
            .p
            .iter()
            .zip(diag)
            .map(|(p, d)| 1.0 / (p * d).sqrt())
            .collect();
        let beta_star = linalg::largest_eigenvalue(&expected.diag_congruence(&w))?;
        let tol = ESO_TOL * expected.max_abs();
        if beta_star <= 1.0 + 1e-12 {
            let ones: Vec<f64> = diag.to_vec();
            if self.verify_eso(m, &ones, tol)? {
                return Ok(1.0);
            }
        }
        Ok((beta_star * (1.0 + 1e-10)).clamp(1.0, tau_bound.max(1.0)))
    }
}

/// Absolute PSD tolerance for ESO certificates, relative to `max|E[M_S]|`.
pub const ESO_TOL: f64 = 1e-12;

fn accumulate_block_inverse(
    acc: &mut SymmetricMatrix,
    m: &SymmetricMatrix,
    s: &Subset,
    weight: f64,
) -> Result<()> {
    let chol = Cholesky::factor(&m.compact_block(s), s.len(), s.indices())?;
    let inv = chol.inverse();
    let (n, k) = (m.dim(), s.len());
    let data = acc.data_mut();
    for (a, i) in s.iter().enumerate() {
        for (b, j) in s.iter().enumerate() {
            data[i * n + j] += weight * inv[a * k + b];
        }
    }
    Ok(())
}

/// Uniform `k`-subset of `[0, n)`, sorted.
pub fn floyd_sample<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    debug_assert!(k <= n);
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for j in (n - k)..n {
        let t = rng.random_range(0..=j as u64) as usize;
        let pick = match chosen.binary_search(&t) {
            Ok(_) => j,
            Err(_) => t,
        };
        // j exceeds everything chosen so far, so it always lands at the end.
        let pos = chosen.binary_search(&pick).unwrap_err();
        chosen.insert(pos, pick);
    }
    chosen
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Lexicographic `k`-combinations of `[0, n)`.
struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            current: (k <= n).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let c = self.current.as_mut().unwrap();
        let k = c.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if c[i] < self.n - k + i {
                c[i] += 1;
                for j in (i + 1)..k {
                    c[j] = c[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}
