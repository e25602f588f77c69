//! Small reproducible problem instances shared by tests, the acceptance
//! suite and the `rates` command.

use rand::Rng;

use crate::linalg::{self, SymmetricMatrix};
use crate::sampling::seeded_rng;

/// Three strongly correlated coordinates; `lambda_min` is about `1e-4`.
pub fn near_singular_3x3() -> SymmetricMatrix {
    SymmetricMatrix::from_rows(&[
        vec![1.0000, 0.9900, 0.9999],
        vec![0.9900, 1.0000, 0.9900],
        vec![0.9999, 0.9900, 1.0000],
    ])
    .expect("fixture is symmetric")
}

/// `B B^T + 0.1 I` with `B` uniform on `[-1, 1]^{n x n}`.
pub fn random_pd(n: usize, seed: u64) -> SymmetricMatrix {
    let mut rng = seeded_rng(seed);
    let b: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    SymmetricMatrix::from_fn(n, |i, j| {
        let g: f64 = (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum();
        if i == j {
            g + 0.1
        } else {
            g
        }
    })
}

/// A positive definite `G` with `G <= M`: `M - t lambda_min(M) u u^T` for a
/// random unit `u` and `t` in `[0.1, 0.9]`.
pub fn dominated_pd(m: &SymmetricMatrix, seed: u64) -> SymmetricMatrix {
    let mut rng = seeded_rng(seed);
    let n = m.dim();
    let mut u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = linalg::norm(&u).max(1e-300);
    u.iter_mut().for_each(|x| *x /= norm);
    let t = rng.random_range(0.1..0.9);
    let shift = t * linalg::smallest_eigenvalue(m).expect("finite fixture");
    SymmetricMatrix::from_fn(n, |i, j| m.get(i, j) - shift * u[i] * u[j])
}
