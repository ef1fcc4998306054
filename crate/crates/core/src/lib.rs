//! Multi-target shrinkage (MTS) estimation of means and covariance matrices.
//!
//! An unbiased estimate Θ̂ is combined with K shrinkage targets T̂^k as
//! `(1 − Σλ_k)·Θ̂ + Σλ_k·T̂^k`, where the intensities λ minimize an estimate of
//! the expected squared error over the simplex `λ ≥ 0, Σλ ≤ 1`.
//!
//! - [`mean`]: shrink a sample mean toward the means of auxiliary datasets.
//! - [`cov`]: shrink a sample covariance toward structured targets and
//!   auxiliary covariances.
//! - [`qp`]: the small simplex-constrained quadratic program behind both.
//! - [`sim`]: Monte Carlo harness, LDA and CSP used to evaluate the estimators.

pub mod cli;
pub mod cov;
pub mod dataset;
pub mod error;
pub mod mean;
pub mod qp;
pub mod shrinkage;
pub mod sim;
pub mod stats;

#[cfg(test)]
mod testutil;

pub use cov::{mts_cov, CovMtsOptions, CovShrinkage, TargetSpec};
pub use dataset::{sample_mean, Dataset};
pub use error::{MtsError, Result};
pub use mean::{mts_mean, MeanMtsOptions, MeanShrinkage};
pub use qp::{solve, ConstraintId, LinearConstraint, QpProblem, QpSolution};
pub use shrinkage::ShrinkageResult;
pub use stats::{eig_sym, sample_covariance, whitening_transform, EigDecomp, SymMatrix, WhitenMode};
