//! SDNA on least squares seen as an iterative Hessian sketch: each primal
//! iterate minimizes a column-sketched quadratic plus a linear correction.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::erm::{sdna_step, DualState, ErmProblem};
use crate::error::{Error, Result};
use crate::linalg::{self, Subset, SymmetricMatrix};
use crate::loss::LossKind;
use crate::sampling::SamplingSpec;

/// Largest feature dimension for the dense `d x d` sketch solve.
pub const MAX_SKETCH_DIM: usize = 512;

fn require_quadratic(problem: &ErmProblem) -> Result<()> {
    if problem.loss() != LossKind::Quadratic {
        return Err(Error::InvalidArgument(
            "least squares requires quadratic loss".into(),
        ));
    }
    Ok(())
}

/// `(w*, alpha*)` from `(I + A^T A / (lambda n)) alpha* = b` and
/// `w* = A alpha* / (lambda n)`.
pub fn least_squares_optimum(problem: &ErmProblem) -> Result<(Vec<f64>, Vec<f64>)> {
    require_quadratic(problem)?;
    let n = problem.n();
    let system = problem
        .gram()
        .scaled(1.0 / problem.scale())
        .add_diagonal(&vec![1.0; n]);
    let alpha = linalg::solve_spd(&system, problem.labels())?;
    let mut w = problem.data().matvec(&alpha);
    let scale = problem.scale();
    w.iter_mut().for_each(|x| *x /= scale);
    Ok((w, alpha))
}

/// Deliberate defects for checking that [`verify_ihs_equivalence`] notices
/// a broken update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IhsFault {
    #[default]
    None,
    /// Drops the `1/n` on the sketched data term of the right-hand side.
    MissingInverseN,
}

/// Minimizer of
/// `(1/2n) |S^T (A^T w - b)|^2 + (lambda/2) |w|^2 + <w, (1/n) A I_S alpha - lambda w_k>`,
/// from its normal equations
/// `((1/n) A_S A_S^T + lambda I) w = (1/n) A_S (b_S - alpha_S) + lambda w_k`.
pub fn ihs_update(
    problem: &ErmProblem,
    w_k: &[f64],
    alpha_k: &[f64],
    s: &Subset,
) -> Result<Vec<f64>> {
    ihs_update_with_fault(problem, w_k, alpha_k, s, IhsFault::None)
}

pub fn ihs_update_with_fault(
    problem: &ErmProblem,
    w_k: &[f64],
    alpha_k: &[f64],
    s: &Subset,
    fault: IhsFault,
) -> Result<Vec<f64>> {
    require_quadratic(problem)?;
    let (d, n) = (problem.d(), problem.n());
    if d > MAX_SKETCH_DIM {
        return Err(Error::TooLarge(format!(
            "sketch solve is dense in d = {d}; limit is {MAX_SKETCH_DIM}"
        )));
    }
    for (len, want) in [(w_k.len(), d), (alpha_k.len(), n)] {
        if len != want {
            return Err(Error::DimensionMismatch {
                expected: want,
                got: len,
            });
        }
    }
    let a = problem.data();
    let inv_n = 1.0 / n as f64;
    let data_scale = match fault {
        IhsFault::None => inv_n,
        IhsFault::MissingInverseN => 1.0,
    };
    let mut lhs = vec![0.0; d * d];
    let mut rhs: Vec<f64> = w_k.iter().map(|w| problem.lambda() * w).collect();
    for i in s.iter() {
        let (rows, vals) = a.column(i);
        for (p, (&r1, &v1)) in rows.iter().zip(vals).enumerate() {
            for (&r2, &v2) in rows[p..].iter().zip(&vals[p..]) {
                lhs[r1 * d + r2] += inv_n * v1 * v2;
            }
        }
        a.col_axpy(i, data_scale * (problem.labels()[i] - alpha_k[i]), &mut rhs);
    }
    for r in 0..d {
        lhs[r * d + r] += problem.lambda();
        for c in 0..r {
            lhs[r * d + c] = lhs[c * d + r];
        }
    }
    let m = SymmetricMatrix::from_row_major(d, lhs)?;
    linalg::solve_spd(&m, &rhs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IhsReport {
    pub steps: usize,
    pub max_discrepancy: f64,
    pub pass: bool,
    /// 1-based index of the first step whose discrepancy exceeded `tol`.
    pub first_failing_step: Option<usize>,
}

/// Runs SDNA from `alpha = 0` and, on the same draws, the sketch update
/// from the same `(w_k, alpha_k)`, comparing the next primal iterates.
pub fn verify_ihs_equivalence<R: Rng + ?Sized>(
    problem: &ErmProblem,
    spec: &SamplingSpec,
    steps: usize,
    rng: &mut R,
    tol: f64,
    fault: IhsFault,
) -> Result<IhsReport> {
    require_quadratic(problem)?;
    let mut state = DualState::zeros(problem);
    let mut max_discrepancy: f64 = 0.0;
    let mut first_failing_step = None;
    for k in 1..=steps {
        let s = spec.draw(rng);
        let sketched = ihs_update_with_fault(problem, state.w(), state.alpha(), &s, fault)?;
        sdna_step(problem, &mut state, &s)?;
        let gap = sketched
            .iter()
            .zip(state.w())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        max_discrepancy = max_discrepancy.max(gap);
        if gap > tol && first_failing_step.is_none() {
            first_failing_step = Some(k);
        }
    }
    Ok(IhsReport {
        steps,
        max_discrepancy,
        pass: first_failing_step.is_none(),
        first_failing_step,
    })
}
