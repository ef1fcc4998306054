//! Common spatial patterns: generalized-eigenvector filters that maximize
//! the variance ratio between two classes, and log-variance features.

use nalgebra::{DMatrix, DVector};

use crate::error::{MtsError, Result};
use crate::stats::{eig_sym_named, SymMatrix};

#[derive(Debug, Clone)]
pub struct CspFilters {
    /// p × 2m; the first m columns favour class A, the last m class B (most
    /// discriminative first within each half).
    pub filters: DMatrix<f64>,
    /// γ = fᵀS_a f / fᵀ(S_a+S_b)f for each column.
    pub gen_eigenvalues: DVector<f64>,
}

/// Solves S_a·f = γ(S_a+S_b)·f and keeps the `m_per_class` most extreme
/// filters at each end. Columns satisfy fᵀ(S_a+S_b)f = 1.
pub fn csp_filters(s_a: &SymMatrix, s_b: &SymMatrix, m_per_class: usize) -> Result<CspFilters> {
    let p = s_a.dim();
    if s_b.dim() != p {
        return Err(MtsError::DimensionMismatch {
            context: "CSP class covariance".into(),
            expected: p,
            actual: s_b.dim(),
        });
    }
    if m_per_class == 0 || 2 * m_per_class > p {
        return Err(MtsError::InvalidParameter(format!(
            "filters per class must be in 1..={}, got {m_per_class}",
            p / 2
        )));
    }
    let mut total: DMatrix<f64> = s_a.as_matrix() + s_b.as_matrix();
    let chol = match total.clone().cholesky() {
        Some(c) => c,
        None => {
            let ridge = 1e-8 * total.trace() / p as f64;
            total += DMatrix::identity(p, p) * ridge;
            total
                .cholesky()
                .ok_or_else(|| MtsError::Singular(" (CSP composite covariance)".into()))?
        }
    };
    // M = L⁻¹ S_a L⁻ᵀ, f = L⁻ᵀ u
    let l = chol.l();
    let l_inv_sa = l
        .solve_lower_triangular(s_a.as_matrix())
        .ok_or_else(|| MtsError::Singular(" (CSP factor)".into()))?;
    let m = l
        .solve_lower_triangular(&l_inv_sa.transpose())
        .ok_or_else(|| MtsError::Singular(" (CSP factor)".into()))?;
    let eig = eig_sym_named(&SymMatrix::new(m), "CSP reduced matrix")?;
    let lt = l.transpose();

    let mut order: Vec<usize> = (0..m_per_class).collect();
    order.extend((0..m_per_class).map(|i| p - 1 - i));
    let mut filters = DMatrix::zeros(p, order.len());
    let mut gammas = DVector::zeros(order.len());
    for (c, &idx) in order.iter().enumerate() {
        let u = eig.eigenvectors.column(idx).into_owned();
        let f = lt
            .solve_upper_triangular(&u)
            .ok_or_else(|| MtsError::Singular(" (CSP back-substitution)".into()))?;
        filters.set_column(c, &f);
        gammas[c] = eig.eigenvalues[idx];
    }
    Ok(CspFilters {
        filters,
        gen_eigenvalues: gammas,
    })
}

/// Log of the unbiased sample variance of each filtered signal fᵀX, where
/// `trial` is p × n.
pub fn csp_features(trial: &DMatrix<f64>, filters: &CspFilters) -> Result<DVector<f64>> {
    let n = trial.ncols();
    if n < 2 {
        return Err(MtsError::InsufficientObservations {
            required: 2,
            actual: n,
        });
    }
    if trial.nrows() != filters.filters.nrows() {
        return Err(MtsError::DimensionMismatch {
            context: "CSP trial".into(),
            expected: filters.filters.nrows(),
            actual: trial.nrows(),
        });
    }
    let projected = filters.filters.transpose() * trial;
    let mut out = DVector::zeros(projected.nrows());
    for (i, row) in projected.row_iter().enumerate() {
        let mean = row.sum() / n as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        if !(var > 0.0) {
            return Err(MtsError::ZeroVariance(i));
        }
        out[i] = var.ln();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{whitening_transform, WhitenMode};
    use crate::testutil::{random_psd, rng};
    use rand::Rng;

    #[test]
    fn diagonal_case() {
        let a = SymMatrix::from_diagonal(&[4.0, 1.0]);
        let b = SymMatrix::from_diagonal(&[1.0, 4.0]);
        let f = csp_filters(&a, &b, 1).unwrap();
        assert!((f.gen_eigenvalues[0] - 0.8).abs() < 1e-12);
        assert!((f.gen_eigenvalues[1] - 0.2).abs() < 1e-12);
        assert!(f.filters[(1, 0)].abs() < 1e-12 && f.filters[(0, 0)].abs() > 0.0);
        assert!(f.filters[(0, 1)].abs() < 1e-12 && f.filters[(1, 1)].abs() > 0.0);
    }

    #[test]
    fn equal_classes_give_half() {
        let mut r = rng(2);
        let s = random_psd(&mut r, 4);
        let f = csp_filters(&s, &s, 2).unwrap();
        let total = s.as_matrix() * 2.0;
        for c in 0..4 {
            assert!((f.gen_eigenvalues[c] - 0.5).abs() < 1e-10);
            let col = f.filters.column(c);
            assert!((col.dot(&(&total * col)) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn matches_whiten_then_eig_oracle() {
        let mut r = rng(10);
        let a = random_psd(&mut r, 6);
        let b = random_psd(&mut r, 6);
        let f = csp_filters(&a, &b, 3).unwrap();
        // Oracle: whiten with (A+B)^(-1/2), then an ordinary eigenproblem.
        let total = SymMatrix::new(a.as_matrix() + b.as_matrix());
        let w = whitening_transform(&total, WhitenMode::Full, None).unwrap();
        let oracle = crate::stats::eig_sym(&a.congruence(&w)).unwrap();
        let expected = [0, 1, 2, 5, 4, 3].map(|i| oracle.eigenvalues[i]);
        for c in 0..6 {
            assert!((f.gen_eigenvalues[c] - expected[c]).abs() < 1e-10);
            let col = f.filters.column(c).into_owned();
            let resid = a.as_matrix() * &col - total.as_matrix() * &col * f.gen_eigenvalues[c];
            assert!(resid.norm() <= 1e-8);
            assert!((col.dot(&(total.as_matrix() * &col)) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_too_many_filters() {
        let s = SymMatrix::identity(4);
        assert!(csp_filters(&s, &s, 3).is_err());
        assert!(csp_filters(&s, &s, 0).is_err());
    }

    #[test]
    fn feature_values() {
        let filters = CspFilters {
            filters: DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            gen_eigenvalues: DVector::from_vec(vec![0.5]),
        };
        let trial = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 3.0, 7.0]);
        let feat = csp_features(&trial, &filters).unwrap();
        assert!((feat[0] - 2.0f64.ln()).abs() < 1e-15);

        let scaled = CspFilters {
            filters: &filters.filters * -3.0,
            gen_eigenvalues: filters.gen_eigenvalues.clone(),
        };
        let feat2 = csp_features(&trial, &scaled).unwrap();
        assert!((feat2[0] - feat[0] - 2.0 * 3.0f64.ln()).abs() < 1e-12);

        let flat = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 5.0]);
        assert!(matches!(csp_features(&flat, &filters), Err(MtsError::ZeroVariance(0))));
    }

    #[test]
    fn feature_matches_loop() {
        let mut r = rng(8);
        let trial = DMatrix::from_fn(3, 20, |_, _| r.gen_range(-1.0..1.0));
        let filters = CspFilters {
            filters: DMatrix::from_fn(3, 2, |_, _| r.gen_range(-1.0..1.0)),
            gen_eigenvalues: DVector::zeros(2),
        };
        let feat = csp_features(&trial, &filters).unwrap();
        for c in 0..2 {
            let sig: Vec<f64> = (0..20)
                .map(|t| (0..3).map(|i| filters.filters[(i, c)] * trial[(i, t)]).sum())
                .collect();
            let m = sig.iter().sum::<f64>() / 20.0;
            let v = sig.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / 19.0;
            assert!((feat[c] - v.ln()).abs() < 1e-12);
        }
    }
}
