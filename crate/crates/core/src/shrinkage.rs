//! The combined estimate shared by the mean and covariance estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::qp::{self, ConstraintId, LinearConstraint, QpProblem};
use crate::stats::SymMatrix;

/// Output of a multi-target shrinkage fit.
#[derive(Debug, Clone)]
pub struct ShrinkageResult<E> {
    /// (1 − Σλ)·Θ̂ + Σ λ_k·T̂^k
    pub estimate: E,
    pub lambda: DVector<f64>,
    pub a_hat: SymMatrix,
    pub b_hat: DVector<f64>,
    /// Value of ½λᵀÂλ − b̂ᵀλ at the returned λ.
    pub objective: f64,
    pub active_set: Vec<ConstraintId>,
}

/// Solves the estimated program for the intensities.
pub(crate) fn solve_intensities(
    a_hat: &SymMatrix,
    b_hat: &DVector<f64>,
    extra: Vec<LinearConstraint>,
) -> Result<qp::QpSolution> {
    let prob = QpProblem::new(a_hat.clone(), b_hat.clone(), extra)?;
    qp::solve(&prob)
}

/// Convex combination of a base vector with target vectors.
pub fn combine_vectors(base: &DVector<f64>, targets: &[DVector<f64>], lambda: &DVector<f64>) -> DVector<f64> {
    let mut out = base * (1.0 - lambda.sum());
    for (t, &l) in targets.iter().zip(lambda.iter()) {
        if l != 0.0 {
            out.axpy(l, t, 1.0);
        }
    }
    out
}

/// Convex combination of a base matrix with target matrices. Returns the base
/// unchanged when every intensity is zero.
pub fn combine_matrices(base: &SymMatrix, targets: &[SymMatrix], lambda: &DVector<f64>) -> SymMatrix {
    if lambda.iter().all(|&l| l == 0.0) {
        return base.clone();
    }
    let mut out: DMatrix<f64> = base.as_matrix() * (1.0 - lambda.sum());
    for (t, &l) in targets.iter().zip(lambda.iter()) {
        if l != 0.0 {
            out += t.as_matrix() * l;
        }
    }
    SymMatrix::new(out)
}
