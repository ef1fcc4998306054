//! Symmetric matrices, sample covariance, eigendecomposition and whitening.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::dataset::{sample_mean, Dataset};
use crate::error::{MtsError, Result};

/// A real symmetric matrix. Construction symmetrizes the input as (M+Mᵀ)/2.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Panics if `m` is not square.
    pub fn new(m: DMatrix<f64>) -> Self {
        assert!(m.is_square(), "SymMatrix requires a square matrix");
        let mut m = m;
        let p = m.nrows();
        for i in 0..p {
            for j in (i + 1)..p {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        SymMatrix(m)
    }

    pub fn identity(p: usize) -> Self {
        SymMatrix(DMatrix::identity(p, p))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Returns `M·self·Mᵀ`.
    pub fn congruence(&self, m: &DMatrix<f64>) -> SymMatrix {
        SymMatrix::new(m * &self.0 * m.transpose())
    }

    /// Row-major nested vectors, the serialized matrix layout.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }
}

impl Deref for SymMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Eigenvalues in descending order with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigDecomp {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl EigDecomp {
    /// R·diag(γ)·Rᵀ
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.reconstruct_with(|g| g)
    }

    /// R·diag(f(γ))·Rᵀ
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.eigenvalues[j]);
        }
        scaled * self.eigenvectors.transpose()
    }
}

/// How strongly to whiten before estimating shrinkage intensities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WhitenMode {
    Full,
    /// Rescale the top `k` principal components to the variance of the (k+1)-th.
    Partial(usize),
}

impl WhitenMode {
    pub const DEFAULT_PARTIAL_RANK: usize = 5;
}

impl std::str::FromStr for WhitenMode {
    type Err = String;

    /// Accepts `full`, `partial` (k = 5) or `partial:<k>`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full" => Ok(WhitenMode::Full),
            "partial" => Ok(WhitenMode::Partial(Self::DEFAULT_PARTIAL_RANK)),
            other => other
                .strip_prefix("partial:")
                .and_then(|k| k.parse().ok())
                .filter(|&k| k >= 1)
                .map(WhitenMode::Partial)
                .ok_or_else(|| format!("invalid whitening mode `{other}` (full | partial | partial:<k>)")),
        }
    }
}

/// Sample covariance with divisor n, centered at the sample mean.
pub fn sample_covariance(x: &Dataset) -> SymMatrix {
    let mu = sample_mean(x);
    let mut centered = x.matrix().clone();
    for mut col in centered.column_iter_mut() {
        col -= &mu;
    }
    scaled_gram(&centered, x.n())
}

/// Uncentered second moment X·Xᵀ/n, the sample covariance of data known to
/// have zero mean.
pub fn second_moment(x: &Dataset) -> SymMatrix {
    scaled_gram(x.matrix(), x.n())
}

fn scaled_gram(m: &DMatrix<f64>, n: usize) -> SymMatrix {
    let p = m.nrows();
    let mut out = DMatrix::zeros(p, p);
    out.gemm(1.0 / n as f64, m, &m.transpose(), 0.0);
    SymMatrix::new(out)
}

/// Average of the sample covariances of several datasets.
pub fn pooled_covariance(sets: &[&Dataset]) -> Result<SymMatrix> {
    let first = sets.first().ok_or(MtsError::NoTargets)?;
    let p = first.p();
    let mut acc = DMatrix::zeros(p, p);
    for ds in sets {
        if ds.p() != p {
            return Err(MtsError::DimensionMismatch {
                context: "pooled covariance".into(),
                expected: p,
                actual: ds.p(),
            });
        }
        acc += sample_covariance(ds).as_matrix();
    }
    Ok(SymMatrix::new(acc / sets.len() as f64))
}

/// Symmetric eigendecomposition with eigenvalues sorted descending.
pub fn eig_sym(m: &SymMatrix) -> Result<EigDecomp> {
    eig_sym_named(m, "symmetric matrix")
}

pub(crate) fn eig_sym_named(m: &SymMatrix, name: &str) -> Result<EigDecomp> {
    let p = m.dim();
    let eig = SymmetricEigen::try_new(m.as_matrix().clone(), f64::EPSILON, 1000 * p.max(1))
        .ok_or_else(|| MtsError::EigenNoConvergence(name.to_string()))?;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = DVector::from_iterator(p, order.iter().map(|&i| eig.eigenvalues[i]));
    let eigenvectors = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigDecomp {
        eigenvalues,
        eigenvectors,
    })
}

/// Default relative eigenvalue floor for full whitening.
pub const WHITEN_FLOOR_REL: f64 = 1e-12;

/// Builds a whitening matrix `W` from a PSD covariance.
///
/// `floor` is absolute; pass `None` for 1e-12 times the largest eigenvalue.
/// Full mode yields `W·S·Wᵀ = I`. Partial mode rescales only the top `k`
/// principal directions to the variance of the (k+1)-th.
pub fn whitening_transform(
    s: &SymMatrix,
    mode: WhitenMode,
    floor: Option<f64>,
) -> Result<DMatrix<f64>> {
    let p = s.dim();
    let eig = eig_sym_named(s, "whitening covariance")?;
    let top = eig.eigenvalues[0];
    let floor = floor.unwrap_or(WHITEN_FLOOR_REL * top);
    match mode {
        WhitenMode::Full => {
            for (index, &value) in eig.eigenvalues.iter().enumerate() {
                if !(value >= floor) || value <= 0.0 {
                    return Err(MtsError::EigenvalueBelowFloor {
                        index,
                        value,
                        floor,
                    });
                }
            }
            Ok(eig.reconstruct_with(|g| 1.0 / g.sqrt()))
        }
        WhitenMode::Partial(k) => {
            if k == 0 || k >= p {
                return Err(MtsError::InvalidWhitenRank { k, p });
            }
            let reference = eig.eigenvalues[k].max(0.0);
            let mut d = DVector::from_element(p, 1.0);
            for i in 0..k {
                let g = eig.eigenvalues[i];
                if !(g > 0.0) || g < floor {
                    return Err(MtsError::EigenvalueBelowFloor {
                        index: i,
                        value: g,
                        floor,
                    });
                }
                d[i] = (reference / g).sqrt();
            }
            let mut scaled = eig.eigenvectors.clone();
            for (j, mut col) in scaled.column_iter_mut().enumerate() {
                col *= d[j];
            }
            Ok(scaled * eig.eigenvectors.transpose())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_dataset, random_orthogonal, random_psd, rng};

    fn frob(m: &DMatrix<f64>) -> f64 {
        m.norm()
    }

    #[test]
    fn covariance_two_points() {
        let x = Dataset::new(DMatrix::from_row_slice(1, 2, &[1.0, 3.0])).unwrap();
        assert_eq!(sample_covariance(&x).as_matrix()[(0, 0)], 1.0);
    }

    #[test]
    fn covariance_identical_columns_is_zero() {
        let x = Dataset::new(DMatrix::from_fn(3, 4, |i, _| i as f64 * 1.7 - 2.0)).unwrap();
        assert!(sample_covariance(&x).iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn covariance_matches_entrywise_loop() {
        let mut r = rng(3);
        let x = random_dataset(&mut r, 4, 50);
        let s = sample_covariance(&x);
        let m = x.matrix();
        let (p, n) = (x.p(), x.n());
        let mu: Vec<f64> = (0..p)
            .map(|i| (0..n).map(|t| m[(i, t)]).sum::<f64>() / n as f64)
            .collect();
        for i in 0..p {
            for j in 0..p {
                let mut acc = 0.0;
                for t in 0..n {
                    acc += (m[(i, t)] - mu[i]) * (m[(j, t)] - mu[j]);
                }
                assert!((s[(i, j)] - acc / n as f64).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn mean_matches_loop_oracle() {
        let mut r = rng(42);
        let x = random_dataset(&mut r, 3, 5);
        let mu = sample_mean(&x);
        for i in 0..3 {
            let mut acc = 0.0;
            for t in 0..5 {
                acc += x.matrix()[(i, t)];
            }
            assert!((mu[i] - acc / 5.0).abs() < 1e-15);
        }
    }

    #[test]
    fn eig_identity_and_diagonal() {
        let e = eig_sym(&SymMatrix::identity(3)).unwrap();
        assert!(e.eigenvalues.iter().all(|&g| (g - 1.0).abs() < 1e-14));
        let e = eig_sym(&SymMatrix::from_diagonal(&[1.0, 4.0])).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[4.0, 1.0]);
        assert!((e.eigenvectors[(1, 0)].abs() - 1.0).abs() < 1e-14);
        assert!(e.eigenvectors[(0, 0)].abs() < 1e-14);
    }

    #[test]
    fn eig_reconstruction_and_orthogonality() {
        let mut r = rng(6);
        for _ in 0..20 {
            let m = DMatrix::from_fn(6, 6, |_, _| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut r));
            let s = SymMatrix::new(m);
            let e = eig_sym(&s).unwrap();
            let rel = frob(&(e.reconstruct() - s.as_matrix())) / frob(s.as_matrix());
            assert!(rel <= 1e-8, "reconstruction {rel}");
            let ortho = frob(&(e.eigenvectors.transpose() * &e.eigenvectors - DMatrix::identity(6, 6)));
            assert!(ortho <= 1e-10 * 6.0);
            assert!(e.eigenvalues.as_slice().windows(2).all(|w| w[0] >= w[1]));
            assert!((e.eigenvalues.sum() - s.trace()).abs() <= 1e-10 * s.trace().abs().max(1.0));
        }
    }

    #[test]
    fn whiten_identity_full_is_identity() {
        let w = whitening_transform(&SymMatrix::identity(4), WhitenMode::Full, None).unwrap();
        assert!(frob(&(w - DMatrix::identity(4, 4))) < 1e-14);
    }

    #[test]
    fn whiten_partial_flattens_top_component() {
        let s = SymMatrix::from_diagonal(&[100.0, 4.0, 1.0]);
        let w = whitening_transform(&s, WhitenMode::Partial(1), None).unwrap();
        let out = s.congruence(&w);
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 4.0, 1.0]));
        assert!(frob(&(out.as_matrix() - expected)) < 1e-12);
    }

    #[test]
    fn whiten_full_random_psd() {
        let mut r = rng(11);
        let s = random_psd(&mut r, 5);
        let w = whitening_transform(&s, WhitenMode::Full, None).unwrap();
        let out = s.congruence(&w);
        assert!(frob(&(out.as_matrix() - DMatrix::identity(5, 5))) <= 1e-8);
    }

    #[test]
    fn whiten_full_rejects_singular() {
        let s = SymMatrix::from_diagonal(&[1.0, 0.0]);
        let err = whitening_transform(&s, WhitenMode::Full, None).unwrap_err();
        assert!(matches!(err, MtsError::EigenvalueBelowFloor { index: 1, .. }));
    }

    #[test]
    fn whiten_partial_rank_bounds() {
        let s = SymMatrix::identity(3);
        assert!(matches!(
            whitening_transform(&s, WhitenMode::Partial(3), None),
            Err(MtsError::InvalidWhitenRank { k: 3, p: 3 })
        ));
        assert!(whitening_transform(&s, WhitenMode::Partial(0), None).is_err());
    }

    #[test]
    fn whiten_mode_parsing() {
        assert_eq!("full".parse::<WhitenMode>().unwrap(), WhitenMode::Full);
        assert_eq!("partial".parse::<WhitenMode>().unwrap(), WhitenMode::Partial(5));
        assert_eq!("partial:2".parse::<WhitenMode>().unwrap(), WhitenMode::Partial(2));
        assert!("partial:0".parse::<WhitenMode>().is_err());
    }

    #[test]
    fn whitened_sample_covariance_is_identity() {
        let mut r = rng(8);
        let x = random_dataset(&mut r, 4, 30);
        let s = sample_covariance(&x);
        let w = whitening_transform(&s, WhitenMode::Full, None).unwrap();
        let sw = sample_covariance(&x.transform(&w).unwrap());
        assert!(frob(&(sw.as_matrix() - DMatrix::identity(4, 4))) <= 1e-8);
    }

    #[test]
    fn rotation_equivariance() {
        let mut r = rng(9);
        let x = random_dataset(&mut r, 5, 20);
        let q = random_orthogonal(&mut r, 5);
        let lhs = sample_covariance(&x.transform(&q).unwrap());
        let rhs = sample_covariance(&x).congruence(&q);
        assert!(frob(&(lhs.as_matrix() - rhs.as_matrix())) <= 1e-10 * frob(rhs.as_matrix()));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::SeedableRng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn covariance_is_symmetric_psd(seed in any::<u64>(), p in 1usize..7, n in 2usize..12) {
                let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let x = random_dataset(&mut r, p, n);
                let s = sample_covariance(&x);
                prop_assert!(s.as_matrix() == &s.transpose());
                let e = eig_sym(&s).unwrap();
                let tol = 1e-10 * s.trace().max(f64::MIN_POSITIVE) / p as f64;
                prop_assert!(e.eigenvalues[p - 1] >= -tol);
            }

            #[test]
            fn covariance_rotation_equivariant(seed in any::<u64>(), p in 2usize..6) {
                let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let x = random_dataset(&mut r, p, 15);
                let q = random_orthogonal(&mut r, p);
                let lhs = sample_covariance(&x.transform(&q).unwrap());
                let rhs = sample_covariance(&x).congruence(&q);
                prop_assert!((lhs.as_matrix() - rhs.as_matrix()).norm() <= 1e-10 * rhs.norm());
            }
        }
    }
}
