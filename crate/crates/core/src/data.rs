//! Sparse example-major datasets: LIBSVM text I/O, a seeded synthetic
//! generator and column normalization.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Subset, SymmetricMatrix};
use crate::sampling::{floyd_sample, seeded_rng};

/// A `d x n` matrix stored by columns (one column per example).
#[derive(Clone, Debug, PartialEq)]
pub struct SparseColumns {
    d: usize,
    col_ptr: Vec<usize>,
    rows: Vec<usize>,
    values: Vec<f64>,
}

impl SparseColumns {
    /// Builds from per-column `(row, value)` lists; rows must be strictly
    /// increasing within a column.
    pub fn from_columns(d: usize, columns: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let mut col_ptr = Vec::with_capacity(columns.len() + 1);
        col_ptr.push(0);
        let nnz = columns.iter().map(Vec::len).sum();
        let mut rows = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for (j, col) in columns.into_iter().enumerate() {
            let mut prev: Option<usize> = None;
            for (r, v) in col {
                if r >= d {
                    return Err(Error::Dataset(format!(
                        "column {j}: row {r} out of range for d = {d}"
                    )));
                }
                if prev.is_some_and(|p| r <= p) {
                    return Err(Error::Dataset(format!(
                        "column {j}: rows not strictly increasing"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite("dataset value"));
                }
                prev = Some(r);
                rows.push(r);
                values.push(v);
            }
            col_ptr.push(rows.len());
        }
        Ok(Self {
            d,
            col_ptr,
            rows,
            values,
        })
    }

    pub fn from_dense_columns(d: usize, columns: &[Vec<f64>]) -> Result<Self> {
        Self::from_columns(
            d,
            columns
                .iter()
                .map(|c| {
                    c.iter()
                        .enumerate()
                        .filter(|(_, v)| **v != 0.0)
                        .map(|(i, v)| (i, *v))
                        .collect()
                })
                .collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.d
    }

    pub fn cols(&self) -> usize {
        self.col_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.rows[a..b], &self.values[a..b])
    }

    /// `a_j^T w`.
    pub fn col_dot(&self, j: usize, w: &[f64]) -> f64 {
        let (r, v) = self.column(j);
        r.iter().zip(v).map(|(&i, &x)| x * w[i]).sum()
    }

    /// `w += alpha a_j`.
    pub fn col_axpy(&self, j: usize, alpha: f64, w: &mut [f64]) {
        let (r, v) = self.column(j);
        for (&i, &x) in r.iter().zip(v) {
            w[i] += alpha * x;
        }
    }

    pub fn col_norm_sq(&self, j: usize) -> f64 {
        self.column(j).1.iter().map(|x| x * x).sum()
    }

    /// `a_i^T a_j` by merging the two index lists.
    pub fn col_col_dot(&self, i: usize, j: usize) -> f64 {
        let (ri, vi) = self.column(i);
        let (rj, vj) = self.column(j);
        let (mut a, mut b, mut s) = (0, 0, 0.0);
        while a < ri.len() && b < rj.len() {
            match ri[a].cmp(&rj[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    s += vi[a] * vj[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        s
    }

    /// `A alpha`.
    pub fn matvec(&self, alpha: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for (j, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                self.col_axpy(j, a, &mut out);
            }
        }
        out
    }

    /// `A^T w`.
    pub fn transpose_matvec(&self, w: &[f64]) -> Vec<f64> {
        (0..self.cols()).map(|j| self.col_dot(j, w)).collect()
    }

    /// Compact `k x k` block of `A^T A` on `s`, row-major.
    pub fn gram_block(&self, s: &Subset) -> Vec<f64> {
        let idx = s.indices();
        let k = idx.len();
        if k == 1 {
            return vec![self.col_norm_sq(idx[0])];
        }
        let mut out = vec![0.0; k * k];
        let mut dense = vec![0.0; self.d];
        for (a, &i) in idx.iter().enumerate() {
            let (r, v) = self.column(i);
            for (&row, &x) in r.iter().zip(v) {
                dense[row] = x;
            }
            for (b, &j) in idx.iter().enumerate().skip(a) {
                let g = self.col_dot(j, &dense);
                out[a * k + b] = g;
                out[b * k + a] = g;
            }
            for &row in r {
                dense[row] = 0.0;
            }
        }
        out
    }

    /// Full `A^T A`.
    pub fn gram(&self) -> SymmetricMatrix {
        let n = self.cols();
        let block = self.gram_block(&Subset::full(n));
        SymmetricMatrix::from_row_major(n, block).expect("gram matrix is symmetric by construction")
    }

    pub fn to_dense_columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols())
            .map(|j| {
                let mut c = vec![0.0; self.d];
                self.col_axpy(j, 1.0, &mut c);
                c
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    columns: SparseColumns,
    labels: Vec<f64>,
}

impl RawDataset {
    pub fn new(columns: SparseColumns, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != columns.cols() {
            return Err(Error::DimensionMismatch {
                expected: columns.cols(),
                got: labels.len(),
            });
        }
        if labels.is_empty() {
            return Err(Error::Dataset("no examples".into()));
        }
        if labels.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("labels"));
        }
        Ok(Self { columns, labels })
    }

    pub fn d(&self) -> usize {
        self.columns.rows()
    }

    pub fn n(&self) -> usize {
        self.columns.cols()
    }

    pub fn columns(&self) -> &SparseColumns {
        &self.columns
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn into_parts(self) -> (SparseColumns, Vec<f64>) {
        (self.columns, self.labels)
    }
}

fn format_err(path: &str, line: usize, message: String) -> Error {
    Error::Format {
        path: path.to_string(),
        line,
        message,
    }
}

/// Parses LIBSVM text. `source` names the input in error messages. Blank
/// lines are skipped; indices are 1-based, strictly increasing per line.
pub fn parse_libsvm(text: &str, source: &str, expect_dim: Option<usize>) -> Result<RawDataset> {
    let mut columns = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        let mut tokens = line.split_whitespace();
        let Some(label) = tokens.next() else { continue };
        let label: f64 = label
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| format_err(source, lineno, format!("token 1: bad label {label:?}")))?;
        let mut col = Vec::new();
        let mut prev = 0usize;
        for (pos, tok) in tokens.enumerate() {
            let at = pos + 2;
            let (idx, val) = tok.split_once(':').ok_or_else(|| {
                format_err(
                    source,
                    lineno,
                    format!("token {at}: expected index:value, got {tok:?}"),
                )
            })?;
            let idx: i64 = idx.parse().map_err(|_| {
                format_err(source, lineno, format!("token {at}: bad index {idx:?}"))
            })?;
            if idx < 1 {
                return Err(format_err(
                    source,
                    lineno,
                    format!("token {at}: index {idx} must be >= 1"),
                ));
            }
            let idx = idx as usize;
            if idx == prev {
                return Err(format_err(
                    source,
                    lineno,
                    format!("token {at}: duplicate index {idx}"),
                ));
            }
            if idx < prev {
                return Err(format_err(
                    source,
                    lineno,
                    format!("token {at}: index {idx} after {prev}"),
                ));
            }
            if let Some(d) = expect_dim {
                if idx > d {
                    return Err(format_err(
                        source,
                        lineno,
                        format!("token {at}: index {idx} exceeds dimension {d}"),
                    ));
                }
            }
            let val: f64 = val
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| {
                    format_err(source, lineno, format!("token {at}: bad value {val:?}"))
                })?;
            prev = idx;
            max_index = max_index.max(idx);
            col.push((idx - 1, val));
        }
        columns.push(col);
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::Dataset(format!("{source}: no examples")));
    }
    let d = expect_dim.unwrap_or(max_index);
    RawDataset::new(SparseColumns::from_columns(d, columns)?, labels)
}

pub fn load_libsvm(path: impl AsRef<Path>, expect_dim: Option<usize>) -> Result<RawDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_libsvm(&text, &path.display().to_string(), expect_dim)
}

/// LIBSVM text with shortest round-trip float formatting.
pub fn to_libsvm_string(data: &RawDataset) -> String {
    let mut out = String::new();
    for j in 0..data.n() {
        let _ = write!(out, "{}", data.labels[j]);
        let (r, v) = data.columns.column(j);
        for (&i, &x) in r.iter().zip(v) {
            let _ = write!(out, " {}:{}", i + 1, x);
        }
        out.push('\n');
    }
    out
}

pub fn write_libsvm(data: &RawDataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_libsvm_string(data))?;
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// `sign(a_i^T w)` flipped with probability `label_noise`.
    #[default]
    Classification,
    /// `a_i^T w + label_noise * N(0, 1)`.
    Regression,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub d: usize,
    pub n: usize,
    pub seed: u64,
    pub density: f64,
    pub label_noise: f64,
    #[serde(default)]
    pub target: TargetKind,
}

/// Unit-norm columns with `round(density d)` standard normal nonzeros at
/// uniformly random rows, and labels from a hidden normal `w`.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<RawDataset> {
    if cfg.d == 0 || cfg.n == 0 {
        return Err(Error::InvalidArgument("d and n must be positive".into()));
    }
    if !(cfg.density > 0.0 && cfg.density <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "density {} not in (0, 1]",
            cfg.density
        )));
    }
    if !(0.0..=1.0).contains(&cfg.label_noise) && cfg.target == TargetKind::Classification {
        return Err(Error::InvalidArgument(
            "label_noise must be a probability".into(),
        ));
    }
    if !(cfg.label_noise >= 0.0 && cfg.label_noise.is_finite()) {
        return Err(Error::InvalidArgument(
            "label_noise must be non-negative".into(),
        ));
    }
    let k = ((cfg.density * cfg.d as f64).round() as usize).clamp(1, cfg.d);
    let mut rng = seeded_rng(cfg.seed);
    let hidden: Vec<f64> = (0..cfg.d).map(|_| rng.sample(StandardNormal)).collect();
    let mut columns = Vec::with_capacity(cfg.n);
    let mut labels = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let col = loop {
            let rows = floyd_sample(cfg.d, k, &mut rng);
            let vals: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
            let norm = vals.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                break rows
                    .into_iter()
                    .zip(vals.into_iter().map(|v| v / norm))
                    .collect::<Vec<_>>();
            }
        };
        let score: f64 = col.iter().map(|&(i, v)| v * hidden[i]).sum();
        let label = match cfg.target {
            TargetKind::Classification => {
                let sign = if score >= 0.0 { 1.0 } else { -1.0 };
                if rng.random::<f64>() < cfg.label_noise {
                    -sign
                } else {
                    sign
                }
            }
            TargetKind::Regression => {
                score + cfg.label_noise * rng.sample::<f64, _>(StandardNormal)
            }
        };
        columns.push(col);
        labels.push(label);
    }
    RawDataset::new(SparseColumns::from_columns(cfg.d, columns)?, labels)
}

/// Scales every column to unit Euclidean norm.
pub fn normalize_columns(data: &RawDataset) -> Result<RawDataset> {
    let a = data.columns();
    let mut columns = Vec::with_capacity(a.cols());
    for j in 0..a.cols() {
        let norm = a.col_norm_sq(j).sqrt();
        if norm == 0.0 {
            return Err(Error::Dataset(format!(
                "column {j} is zero and cannot be normalized"
            )));
        }
        let (r, v) = a.column(j);
        columns.push(r.iter().zip(v).map(|(&i, &x)| (i, x / norm)).collect());
    }
    RawDataset::new(
        SparseColumns::from_columns(a.rows(), columns)?,
        data.labels.clone(),
    )
}
