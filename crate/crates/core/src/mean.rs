//! Multi-target shrinkage of the sample mean toward the means of auxiliary
//! datasets.

use nalgebra::{DMatrix, DVector};

use crate::dataset::{sample_mean, Dataset};
use crate::error::{MtsError, Result};
use crate::qp::LinearConstraint;
use crate::shrinkage::{combine_vectors, solve_intensities, ShrinkageResult};
use crate::stats::{pooled_covariance, sample_covariance, whitening_transform, SymMatrix, WhitenMode};

#[derive(Debug, Clone)]
pub struct MeanMtsOptions {
    /// Keep every primary observation weighted at least as much as any
    /// auxiliary observation.
    pub weight_constraint: bool,
    /// Whiten before estimating the intensities. The final combination is
    /// always taken in the original coordinates.
    pub whiten: Option<WhitenMode>,
    /// Covariance used to build the whitener. Defaults to the pooled sample
    /// covariance of all datasets passed to [`mts_mean`].
    pub covariance_for_whitening: Option<SymMatrix>,
}

impl Default for MeanMtsOptions {
    fn default() -> Self {
        Self {
            weight_constraint: true,
            whiten: None,
            covariance_for_whitening: None,
        }
    }
}

pub type MeanShrinkage = ShrinkageResult<DVector<f64>>;

/// Â_kl = Σ_i (μ̂^k_i − μ̂_i)(μ̂^l_i − μ̂_i)
pub fn estimate_a_mean(mu_hat: &DVector<f64>, targets: &[DVector<f64>]) -> Result<SymMatrix> {
    if targets.is_empty() {
        return Err(MtsError::NoTargets);
    }
    let p = mu_hat.len();
    let mut diffs = DMatrix::zeros(p, targets.len());
    for (k, t) in targets.iter().enumerate() {
        if t.len() != p {
            return Err(MtsError::DimensionMismatch {
                context: format!("target mean {k}"),
                expected: p,
                actual: t.len(),
            });
        }
        diffs.set_column(k, &(t - mu_hat));
    }
    Ok(SymMatrix::new(diffs.transpose() * diffs))
}

/// b̂ = Σ_i var̂(μ̂_i) with var̂(μ̂_i) = Σ_t (x_it − μ̂_i)² / (n(n−1)),
/// repeated for each of the `k` targets.
pub fn estimate_b_mean(x: &Dataset, k: usize) -> Result<DVector<f64>> {
    let n = x.n();
    if n < 2 {
        return Err(MtsError::InsufficientObservations {
            required: 2,
            actual: n,
        });
    }
    let mu = sample_mean(x);
    let mut total = 0.0;
    for (i, row) in x.matrix().row_iter().enumerate() {
        total += row.iter().map(|v| (v - mu[i]).powi(2)).sum::<f64>();
    }
    let b = total / (n as f64 * (n as f64 - 1.0));
    Ok(DVector::from_element(k, b))
}

/// Rows `λ_k/n_k + Σ_l λ_l/n ≤ 1/n`: no auxiliary observation outweighs a
/// primary one.
pub fn weight_constraint_rows(n: usize, n_k: &[usize]) -> Vec<LinearConstraint> {
    let inv_n = 1.0 / n as f64;
    (0..n_k.len())
        .map(|k| {
            let row = (0..n_k.len())
                .map(|j| if j == k { inv_n + 1.0 / n_k[k] as f64 } else { inv_n })
                .collect();
            LinearConstraint::new(row, inv_n)
        })
        .collect()
}

/// Shrinks the mean of `x` toward the means of `aux`.
pub fn mts_mean(x: &Dataset, aux: &[Dataset], opts: &MeanMtsOptions) -> Result<MeanShrinkage> {
    if aux.is_empty() {
        return Err(MtsError::NoTargets);
    }
    for (k, ds) in aux.iter().enumerate() {
        if ds.p() != x.p() {
            return Err(MtsError::DimensionMismatch {
                context: format!("auxiliary dataset {}", ds.label().map_or(k.to_string(), str::to_string)),
                expected: x.p(),
                actual: ds.p(),
            });
        }
    }
    let means: Vec<DVector<f64>> = aux.iter().map(sample_mean).collect();
    let sizes: Vec<usize> = aux.iter().map(Dataset::n).collect();
    let mut opts = opts.clone();
    if opts.whiten.is_some() && opts.covariance_for_whitening.is_none() {
        let all: Vec<&Dataset> = std::iter::once(x).chain(aux.iter()).collect();
        opts.covariance_for_whitening = Some(pooled_covariance(&all)?);
    }
    mts_mean_with_targets(x, &means, &sizes, &opts)
}

/// Shrinks the mean of `x` toward precomputed target means. `sizes` gives the
/// number of observations behind each target (used by the weight
/// constraint). Without an explicit whitening covariance the sample
/// covariance of `x` is used.
pub fn mts_mean_with_targets(
    x: &Dataset,
    targets: &[DVector<f64>],
    sizes: &[usize],
    opts: &MeanMtsOptions,
) -> Result<MeanShrinkage> {
    if targets.is_empty() {
        return Err(MtsError::NoTargets);
    }
    if sizes.len() != targets.len() {
        return Err(MtsError::DimensionMismatch {
            context: "target sizes".into(),
            expected: targets.len(),
            actual: sizes.len(),
        });
    }
    let k = targets.len();
    let mu = sample_mean(x);

    let (a_hat, b_hat) = match opts.whiten {
        None => (estimate_a_mean(&mu, targets)?, estimate_b_mean(x, k)?),
        Some(mode) => {
            let cov = match &opts.covariance_for_whitening {
                Some(c) => c.clone(),
                None => sample_covariance(x),
            };
            if cov.dim() != x.p() {
                return Err(MtsError::DimensionMismatch {
                    context: "whitening covariance".into(),
                    expected: x.p(),
                    actual: cov.dim(),
                });
            }
            let w = whitening_transform(&cov, mode, None)?;
            let wt: Vec<DVector<f64>> = targets.iter().map(|t| &w * t).collect();
            let a = estimate_a_mean(&(&w * &mu), &wt)?;
            let b = estimate_b_mean(&x.transform(&w)?, k)?;
            (a, b)
        }
    };

    let extra = if opts.weight_constraint {
        weight_constraint_rows(x.n(), sizes)
    } else {
        Vec::new()
    };
    let sol = solve_intensities(&a_hat, &b_hat, extra)?;
    let estimate = combine_vectors(&mu, targets, &sol.lambda);
    Ok(ShrinkageResult {
        estimate,
        lambda: sol.lambda,
        a_hat,
        b_hat,
        objective: sol.objective,
        active_set: sol.active_set,
    })
}
