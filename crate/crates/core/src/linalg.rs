//! Dense symmetric linear algebra.
//!
//! Everything downstream consumes Hessian-like data through [`SymmetricMatrix`]
//! and random coordinate blocks through [`Subset`]. Solves restricted to a
//! subset only ever factor the compacted `|S| x |S|` block.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Pivots below this fraction of the largest diagonal entry are treated as
/// a failed factorization.
pub const PIVOT_THRESHOLD: f64 = 1e-12;

/// Dense symmetric matrix, stored as a full row-major square.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "dimension must be at least 1");
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * m.n + i] = d;
        }
        m
    }

    /// Builds a matrix from `f(i, j)` evaluated on the upper triangle and
    /// mirrored, so the result is symmetric by construction.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    /// Row-major constructor. Entries must be symmetric up to a relative
    /// tolerance of `1e-12`; the result is exactly symmetrized.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "dimension must be at least 1".into(),
            ));
        }
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        let scale = data.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
        let mut m = Self { n, data };
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (m.data[i * n + j], m.data[j * n + i]);
                let diff = (a - b).abs();
                if diff > 1e-12 * scale {
                    return Err(Error::NotSymmetric { i, j, diff });
                }
                let avg = 0.5 * (a + b);
                m.data[i * n + j] = avg;
                m.data[j * n + i] = avg;
            }
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(n, data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// `self + D(d)`.
    pub fn add_diagonal(&self, d: &[f64]) -> Self {
        assert_eq!(self.n, d.len());
        let mut out = self.clone();
        for (i, &di) in d.iter().enumerate() {
            out.data[i * self.n + i] += di;
        }
        out
    }

    /// `D(d) * self * D(d)`.
    pub fn diag_congruence(&self, d: &[f64]) -> Self {
        assert_eq!(self.n, d.len());
        Self::from_fn(self.n, |i, j| d[i] * self.get(i, j) * d[j])
    }

    /// `B * self * B` for symmetric `B`.
    pub fn congruence(&self, b: &Self) -> Self {
        let bm = b.to_dmatrix();
        from_dmatrix_symmetrized(&(&bm * self.to_dmatrix() * &bm))
    }

    /// The `|S| x |S|` block on rows and columns of `s`, row-major.
    pub fn compact_block(&self, s: &Subset) -> Vec<f64> {
        let idx = s.indices();
        let mut block = Vec::with_capacity(idx.len() * idx.len());
        for &i in idx {
            let row = self.row(i);
            block.extend(idx.iter().map(|&j| row[j]));
        }
        block
    }

    pub(crate) fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    pub(crate) fn add_assign_scaled(&mut self, other: &Self, c: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

pub(crate) fn from_dmatrix_symmetrized(m: &DMatrix<f64>) -> SymmetricMatrix {
    let n = m.nrows();
    SymmetricMatrix::from_fn(n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// A nonempty set of coordinates of `[0, n)`, kept strictly increasing.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Subset {
    n: usize,
    indices: Vec<usize>,
}

impl Subset {
    /// Sorts `indices`; rejects empty sets, duplicates and out-of-range entries.
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.is_empty() {
            return Err(Error::InvalidSubset {
                indices,
                n,
                reason: "empty",
            });
        }
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSubset {
                indices,
                n,
                reason: "duplicate index",
            });
        }
        if *indices.last().unwrap() >= n {
            return Err(Error::InvalidSubset {
                indices,
                n,
                reason: "index out of range",
            });
        }
        Ok(Self { n, indices })
    }

    pub fn full(n: usize) -> Self {
        Self {
            n,
            indices: (0..n).collect(),
        }
    }

    pub fn singleton(i: usize, n: usize) -> Result<Self> {
        Self::new(vec![i], n)
    }

    /// Callers guarantee `indices` is strictly increasing and within range.
    pub(crate) fn from_sorted_unchecked(indices: Vec<usize>, n: usize) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(indices.last().is_some_and(|&l| l < n));
        Self { n, indices }
    }

    #[inline]
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    #[inline]
    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    /// `x_S` as a compact vector.
    pub fn gather(&self, x: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&i| x[i]).collect()
    }

    /// Pads a compact vector back to length `n` with zeros off the subset.
    pub fn scatter(&self, compact: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (&i, &v) in self.indices.iter().zip(compact) {
            out[i] = v;
        }
        out
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if self.n != n {
            return Err(Error::InvalidSubset {
                indices: self.indices.clone(),
                n,
                reason: "subset ambient dimension does not match matrix",
            });
        }
        Ok(())
    }
}

/// Lower-triangular Cholesky factor of a small dense SPD block.
#[derive(Clone, Debug)]
pub struct Cholesky {
    k: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors a row-major `k x k` block. `labels` names the coordinates of
    /// the block for error reporting.
    pub fn factor(block: &[f64], k: usize, labels: &[usize]) -> Result<Self> {
        debug_assert_eq!(block.len(), k * k);
        let max_diag = (0..k).fold(0.0f64, |acc, i| acc.max(block[i * k + i]));
        let threshold = PIVOT_THRESHOLD * max_diag;
        let mut l = vec![0.0; k * k];
        for j in 0..k {
            let mut pivot = block[j * k + j];
            for p in 0..j {
                pivot -= l[j * k + p] * l[j * k + p];
            }
            if !(pivot > threshold) || max_diag <= 0.0 {
                return Err(Error::Factorization {
                    subset: labels.to_vec(),
                    position: j,
                    pivot,
                });
            }
            let d = pivot.sqrt();
            l[j * k + j] = d;
            for i in (j + 1)..k {
                let mut s = block[i * k + j];
                for p in 0..j {
                    s -= l[i * k + p] * l[j * k + p];
                }
                l[i * k + j] = s / d;
            }
        }
        Ok(Self { k, l })
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let k = self.k;
        for i in 0..k {
            let mut s = b[i];
            for p in 0..i {
                s -= self.l[i * k + p] * b[p];
            }
            b[i] = s / self.l[i * k + i];
        }
        for i in (0..k).rev() {
            let mut s = b[i];
            for p in (i + 1)..k {
                s -= self.l[p * k + i] * b[p];
            }
            b[i] = s / self.l[i * k + i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Row-major inverse of the factored block.
    pub fn inverse(&self) -> Vec<f64> {
        let k = self.k;
        let mut inv = vec![0.0; k * k];
        let mut e = vec![0.0; k];
        for j in 0..k {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            self.solve_in_place(&mut e);
            for i in 0..k {
                inv[i * k + j] = e[i];
            }
        }
        // symmetrize away round-off
        for i in 0..k {
            for j in (i + 1)..k {
                let avg = 0.5 * (inv[i * k + j] + inv[j * k + i]);
                inv[i * k + j] = avg;
                inv[j * k + i] = avg;
            }
        }
        inv
    }
}

/// `M_S`: `M` on rows and columns of `s`, zero elsewhere.
pub fn principal_submatrix(m: &SymmetricMatrix, s: &Subset) -> Result<SymmetricMatrix> {
    s.check_dim(m.dim())?;
    let n = m.dim();
    let mut out = SymmetricMatrix::zeros(n);
    for &i in s.indices() {
        for &j in s.indices() {
            out.data[i * n + j] = m.get(i, j);
        }
    }
    Ok(out)
}

/// Factors the compact block of `m` on `s`.
pub fn factor_block(m: &SymmetricMatrix, s: &Subset) -> Result<Cholesky> {
    s.check_dim(m.dim())?;
    Cholesky::factor(&m.compact_block(s), s.len(), s.indices())
}

/// `(M_S)^dagger g`: supported on `s`, with `M_SS h_S = g_S`.
pub fn restricted_solve(m: &SymmetricMatrix, s: &Subset, g: &[f64]) -> Result<Vec<f64>> {
    if g.len() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: g.len(),
        });
    }
    let chol = factor_block(m, s)?;
    let mut rhs = s.gather(g);
    chol.solve_in_place(&mut rhs);
    Ok(s.scatter(&rhs))
}

/// `(M_S)^dagger` padded to `n x n`.
pub fn restricted_inverse(m: &SymmetricMatrix, s: &Subset) -> Result<SymmetricMatrix> {
    let chol = factor_block(m, s)?;
    let inv = chol.inverse();
    let n = m.dim();
    let k = s.len();
    let mut out = SymmetricMatrix::zeros(n);
    for (a, &i) in s.indices().iter().enumerate() {
        for (b, &j) in s.indices().iter().enumerate() {
            out.data[i * n + j] = inv[a * k + b];
        }
    }
    Ok(out)
}

pub fn solve_spd(m: &SymmetricMatrix, b: &[f64]) -> Result<Vec<f64>> {
    restricted_solve(m, &Subset::full(m.dim()), b)
}

pub fn inverse_spd(m: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    restricted_inverse(m, &Subset::full(m.dim()))
}

/// Eigen-decomposition with eigenvalues sorted ascending.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Column `k` (stored as `vectors[k]`) pairs with `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

pub fn symmetric_eigen(m: &SymmetricMatrix) -> Result<Eigen> {
    if m.as_row_major().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigenvalue input"));
    }
    let eig = SymmetricEigen::try_new(m.to_dmatrix(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Invariant("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..m.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    Ok(Eigen {
        values: order.iter().map(|&k| eig.eigenvalues[k]).collect(),
        vectors: order
            .iter()
            .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
            .collect(),
    })
}

fn eigenvalues(m: &SymmetricMatrix) -> Result<Vec<f64>> {
    if m.as_row_major().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigenvalue input"));
    }
    let mut vals: Vec<f64> = m
        .to_dmatrix()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

pub fn smallest_eigenvalue(m: &SymmetricMatrix) -> Result<f64> {
    Ok(eigenvalues(m)?[0])
}

pub fn largest_eigenvalue(m: &SymmetricMatrix) -> Result<f64> {
    Ok(*eigenvalues(m)?.last().unwrap())
}

/// `lambda_min(m) >= -tol`. Non-finite input is never PSD.
pub fn is_psd(m: &SymmetricMatrix, tol: f64) -> bool {
    smallest_eigenvalue(m).is_ok_and(|l| l >= -tol)
}

/// Symmetric PSD square root; eigenvalues below zero (round-off) are clamped.
pub fn sqrt_psd(m: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let eig = symmetric_eigen(m)?;
    let roots: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    Ok(spectral_compose(&eig, &roots))
}

/// `V diag(values) V^T`.
pub(crate) fn spectral_compose(eig: &Eigen, values: &[f64]) -> SymmetricMatrix {
    let n = values.len();
    SymmetricMatrix::from_fn(n, |i, j| {
        eig.vectors
            .iter()
            .zip(values)
            .map(|(v, &l)| l * v[i] * v[j])
            .sum()
    })
}
