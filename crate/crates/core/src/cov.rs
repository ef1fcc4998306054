//! Multi-target shrinkage of the sample covariance toward structured targets
//! and the covariances of auxiliary datasets.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{MtsError, Result};
use crate::shrinkage::{combine_matrices, solve_intensities, ShrinkageResult};
use crate::stats::{sample_covariance, second_moment, whitening_transform, SymMatrix, WhitenMode};

/// One shrinkage target for the covariance.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    /// ν·I with ν = trace(S)/p, the average sample eigenvalue.
    IdentityScaled,
    /// Diagonal of S.
    Diagonal,
    /// Diagonal of S with off-diagonals sqrt(S_ii·S_jj)·r̄.
    ConstCorr,
    /// Sample covariance of another dataset.
    AuxDataset(Dataset),
}

impl TargetSpec {
    pub fn name(&self) -> String {
        match self {
            TargetSpec::IdentityScaled => "identity".into(),
            TargetSpec::Diagonal => "diag".into(),
            TargetSpec::ConstCorr => "const-corr".into(),
            TargetSpec::AuxDataset(ds) => format!("aux:{}", ds.label().unwrap_or("dataset")),
        }
    }
}

impl fmt::Display for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Parses the structured targets; auxiliary datasets need loading and are
/// handled by the caller.
impl FromStr for TargetSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "identity" => Ok(TargetSpec::IdentityScaled),
            "diag" | "diagonal" => Ok(TargetSpec::Diagonal),
            "const-corr" => Ok(TargetSpec::ConstCorr),
            other => Err(format!("unknown target `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CovMtsOptions {
    pub whiten: Option<WhitenMode>,
    /// Treat all data as zero-mean: S = X·Xᵀ/n and no centering in b̂.
    pub assume_zero_mean: bool,
}

pub type CovShrinkage = ShrinkageResult<SymMatrix>;

/// Sample covariance as used by the covariance estimators: centered, or
/// X·Xᵀ/n under the zero-mean assumption.
pub fn covariance_for(x: &Dataset, zero_mean: bool) -> SymMatrix {
    if zero_mean {
        second_moment(x)
    } else {
        sample_covariance(x)
    }
}

/// Builds target `spec` from the primary sample covariance `s`.
pub fn build_target(spec: &TargetSpec, s: &SymMatrix, assume_zero_mean: bool) -> Result<SymMatrix> {
    let p = s.dim();
    match spec {
        TargetSpec::IdentityScaled => {
            let nu = s.trace() / p as f64;
            Ok(SymMatrix::new(DMatrix::identity(p, p) * nu))
        }
        TargetSpec::Diagonal => Ok(SymMatrix::new(DMatrix::from_diagonal(&s.diagonal()))),
        TargetSpec::ConstCorr => {
            let d = s.diagonal();
            if let Some(i) = d.iter().position(|&v| !(v > 0.0)) {
                return Err(MtsError::NonPositiveVariance(i));
            }
            let sd = d.map(f64::sqrt);
            let mut sum = 0.0;
            let mut pairs = 0usize;
            for i in 0..p {
                for j in (i + 1)..p {
                    sum += s[(i, j)] / (sd[i] * sd[j]);
                    pairs += 1;
                }
            }
            let r_bar = if pairs == 0 { 0.0 } else { sum / pairs as f64 };
            Ok(SymMatrix::new(DMatrix::from_fn(p, p, |i, j| {
                if i == j {
                    d[i]
                } else {
                    sd[i] * sd[j] * r_bar
                }
            })))
        }
        TargetSpec::AuxDataset(ds) => {
            if ds.p() != p {
                return Err(MtsError::DimensionMismatch {
                    context: format!("auxiliary dataset {}", ds.label().unwrap_or("")),
                    expected: p,
                    actual: ds.p(),
                });
            }
            Ok(covariance_for(ds, assume_zero_mean))
        }
    }
}

/// Â_kl = Σ_ij (T^k_ij − S_ij)(T^l_ij − S_ij)
pub fn estimate_a_cov(s: &SymMatrix, targets: &[SymMatrix]) -> Result<SymMatrix> {
    if targets.is_empty() {
        return Err(MtsError::NoTargets);
    }
    let diffs: Vec<DMatrix<f64>> = targets
        .iter()
        .enumerate()
        .map(|(k, t)| {
            if t.dim() != s.dim() {
                Err(MtsError::DimensionMismatch {
                    context: format!("target {k}"),
                    expected: s.dim(),
                    actual: t.dim(),
                })
            } else {
                Ok(t.as_matrix() - s.as_matrix())
            }
        })
        .collect::<Result<_>>()?;
    let k = diffs.len();
    let mut a = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = diffs[i].dot(&diffs[j]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    Ok(SymMatrix::new(a))
}

/// b̂ = Σ_ij var̂(S_ij) where var̂(S_ij) is the sample variance of the
/// products w_ijs = x̃_is·x̃_js divided by n.
///
/// Uses Σ_ij Σ_s (w_ijs − S_ij)² = Σ_s ‖x̃_s‖⁴ − n‖S‖²_F, which is O(pn) once
/// S is known.
pub fn estimate_b_cov(x: &Dataset, k: usize, assume_zero_mean: bool) -> Result<DVector<f64>> {
    let n = x.n();
    if n < 2 {
        return Err(MtsError::InsufficientObservations {
            required: 2,
            actual: n,
        });
    }
    let s = covariance_for(x, assume_zero_mean);
    Ok(DVector::from_element(k, b_cov_from(x, &s, assume_zero_mean)))
}

fn b_cov_from(x: &Dataset, s: &SymMatrix, assume_zero_mean: bool) -> f64 {
    let n = x.n();
    let m = x.matrix();
    let mu = if assume_zero_mean {
        DVector::zeros(x.p())
    } else {
        crate::dataset::sample_mean(x)
    };
    let s_norm2 = s.norm_squared();
    let mut total = 0.0;
    for col in m.column_iter() {
        let sq: f64 = col.iter().zip(mu.iter()).map(|(v, u)| (v - u).powi(2)).sum();
        total += sq * sq;
    }
    let total = (total - n as f64 * s_norm2).max(0.0);
    total / ((n as f64 - 1.0) * n as f64)
}

/// A target ready for fitting: either rebuilt from the (possibly whitened)
/// sample covariance, or a fixed matrix computed from independent data.
#[derive(Debug, Clone)]
pub enum PreparedTarget {
    Structured(TargetSpec),
    Matrix(SymMatrix),
}

/// Shrinks the sample covariance of `x` toward the given targets.
pub fn mts_cov(x: &Dataset, specs: &[TargetSpec], opts: &CovMtsOptions) -> Result<CovShrinkage> {
    if specs.is_empty() {
        return Err(MtsError::NoTargets);
    }
    let s = covariance_for(x, opts.assume_zero_mean);
    let prepared: Vec<PreparedTarget> = specs
        .iter()
        .map(|spec| match spec {
            TargetSpec::AuxDataset(_) => {
                build_target(spec, &s, opts.assume_zero_mean).map(PreparedTarget::Matrix)
            }
            structured => Ok(PreparedTarget::Structured(structured.clone())),
        })
        .collect::<Result<_>>()?;
    mts_cov_prepared(x, &s, &prepared, opts)
}

/// Fits the covariance program given the primary sample covariance `s`
/// (consistent with `opts.assume_zero_mean`) and prepared targets.
pub fn mts_cov_prepared(
    x: &Dataset,
    s: &SymMatrix,
    targets: &[PreparedTarget],
    opts: &CovMtsOptions,
) -> Result<CovShrinkage> {
    if targets.is_empty() {
        return Err(MtsError::NoTargets);
    }
    if s.dim() != x.p() {
        return Err(MtsError::DimensionMismatch {
            context: "sample covariance".into(),
            expected: x.p(),
            actual: s.dim(),
        });
    }
    let zm = opts.assume_zero_mean;
    let build = |t: &PreparedTarget, base: &SymMatrix, w: Option<&DMatrix<f64>>| -> Result<SymMatrix> {
        match (t, w) {
            (PreparedTarget::Structured(spec), _) => build_target(spec, base, zm),
            (PreparedTarget::Matrix(m), None) => Ok(m.clone()),
            (PreparedTarget::Matrix(m), Some(w)) => Ok(m.congruence(w)),
        }
    };
    let built: Vec<SymMatrix> = targets
        .iter()
        .map(|t| build(t, s, None))
        .collect::<Result<_>>()?;
    let k = built.len();

    let (a_hat, b_hat) = match opts.whiten {
        None => (
            estimate_a_cov(s, &built)?,
            DVector::from_element(k, b_cov_from(x, s, zm)),
        ),
        Some(mode) => {
            let w = whitening_transform(s, mode, None)?;
            let xw = x.transform(&w)?;
            let sw = s.congruence(&w);
            let tw: Vec<SymMatrix> = targets
                .iter()
                .map(|t| build(t, &sw, Some(&w)))
                .collect::<Result<_>>()?;
            (
                estimate_a_cov(&sw, &tw)?,
                DVector::from_element(k, b_cov_from(&xw, &sw, zm)),
            )
        }
    };

    let sol = solve_intensities(&a_hat, &b_hat, Vec::new())?;
    let estimate = combine_matrices(s, &built, &sol.lambda);
    Ok(ShrinkageResult {
        estimate,
        lambda: sol.lambda,
        a_hat,
        b_hat,
        objective: sol.objective,
        active_set: sol.active_set,
    })
}

/// Targets as built by [`mts_cov`], for inspection.
pub fn build_targets(x: &Dataset, specs: &[TargetSpec], opts: &CovMtsOptions) -> Result<Vec<SymMatrix>> {
    let s = covariance_for(x, opts.assume_zero_mean);
    specs
        .iter()
        .map(|spec| build_target(spec, &s, opts.assume_zero_mean))
        .collect()
}
