//! Two-class linear discriminant analysis from given means and covariance.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{MtsError, Result};
use crate::stats::SymMatrix;

#[derive(Debug, Clone)]
pub struct LdaModel {
    pub weight: DVector<f64>,
    pub bias: f64,
    pub class_labels: (String, String),
}

/// Default ridge: 1e-8 · trace(cov)/p.
pub fn default_ridge(cov: &SymMatrix) -> f64 {
    1e-8 * cov.trace() / cov.dim() as f64
}

/// weight = (cov + ridge·I)⁻¹(mean_a − mean_b), bias = −weightᵀ(mean_a + mean_b)/2.
pub fn lda_train(
    mean_a: &DVector<f64>,
    mean_b: &DVector<f64>,
    cov: &SymMatrix,
    ridge: Option<f64>,
) -> Result<LdaModel> {
    let p = cov.dim();
    for m in [mean_a, mean_b] {
        if m.len() != p {
            return Err(MtsError::DimensionMismatch {
                context: "LDA class mean".into(),
                expected: p,
                actual: m.len(),
            });
        }
    }
    let ridge = ridge.unwrap_or_else(|| default_ridge(cov));
    if ridge < 0.0 {
        return Err(MtsError::InvalidParameter("ridge must be nonnegative".into()));
    }
    let reg: DMatrix<f64> = cov.as_matrix() + DMatrix::identity(p, p) * ridge;
    let diff = mean_a - mean_b;
    let weight = match reg.clone().cholesky() {
        Some(c) => c.solve(&diff),
        None => reg
            .lu()
            .solve(&diff)
            .ok_or_else(|| MtsError::Singular(" (LDA covariance after ridge)".into()))?,
    };
    if weight.iter().any(|v| !v.is_finite()) {
        return Err(MtsError::Singular(" (LDA covariance after ridge)".into()));
    }
    let bias = -weight.dot(&(mean_a + mean_b)) / 2.0;
    Ok(LdaModel {
        weight,
        bias,
        class_labels: ("A".into(), "B".into()),
    })
}

impl LdaModel {
    pub fn decision(&self, x: &DVector<f64>) -> f64 {
        self.weight.dot(x) + self.bias
    }

    /// True for class A (strictly positive decision value).
    pub fn predict_a(&self, x: &DVector<f64>) -> bool {
        self.decision(x) > 0.0
    }

    /// Expected accuracy for two equiprobable Gaussian classes N(μ_A, C) and
    /// N(μ_B, C).
    pub fn gaussian_accuracy(&self, mu_a: &DVector<f64>, mu_b: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
        let sd = self.weight.dot(&(cov * &self.weight)).sqrt();
        if !(sd > 0.0) {
            // Constant decision: one whole class is misclassified.
            return 0.5;
        }
        let phi = Normal::standard();
        0.5 * phi.cdf(self.decision(mu_a) / sd) + 0.5 * phi.cdf(-self.decision(mu_b) / sd)
    }
}
