//! Random draws shared by the simulation generators and tests.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dataset::Dataset;
use crate::stats::SymMatrix;

/// p×n matrix of independent standard normal draws.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R, p: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, n, |_, _| rng.sample(StandardNormal))
}

/// `n` draws of N(mean, diag(scale)²), i.e. standard normals with row i
/// multiplied by `scale[i]` and shifted by `mean[i]`.
pub fn diagonal_gaussian<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &DVector<f64>,
    scale: &DVector<f64>,
    n: usize,
) -> Dataset {
    let p = mean.len();
    let mut m = standard_normal(rng, p, n);
    for mut col in m.column_iter_mut() {
        col.component_mul_assign(scale);
        col += mean;
    }
    Dataset::new(m).expect("generated data is valid")
}

/// `n` draws of N(mean, L·Lᵀ) for a given factor `L`.
pub fn gaussian_with_factor<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &DVector<f64>,
    factor: &DMatrix<f64>,
    n: usize,
) -> Dataset {
    let p = mean.len();
    let z = standard_normal(rng, factor.ncols(), n);
    let mut m = factor * z;
    for mut col in m.column_iter_mut() {
        col += mean;
    }
    debug_assert_eq!(m.nrows(), p);
    Dataset::new(m).expect("generated data is valid")
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, p: usize) -> DMatrix<f64> {
    let qr = standard_normal(rng, p, p).qr();
    let mut q = qr.q();
    let r = qr.r();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

/// Random positive definite matrix G·Gᵀ/k.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, k: usize) -> SymMatrix {
    let g = standard_normal(rng, k, k);
    SymMatrix::new(&g * g.transpose() / k.max(1) as f64)
}

/// Independent fair ±1 signs.
pub fn random_signs<R: Rng + ?Sized>(rng: &mut R, p: usize) -> DVector<f64> {
    DVector::from_fn(p, |_, _| if rng.gen::<bool>() { 1.0 } else { -1.0 })
}

/// Uniformly random disjoint pairing of the given coordinates; an odd
/// leftover coordinate is dropped.
pub fn random_pairing<R: Rng + ?Sized>(rng: &mut R, coords: &[usize]) -> Vec<(usize, usize)> {
    let mut c = coords.to_vec();
    c.shuffle(rng);
    c.chunks_exact(2).map(|w| (w[0], w[1])).collect()
}
