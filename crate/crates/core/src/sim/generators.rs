//! Data generators for the five simulation scenarios.
//!
//! Each scenario splits into a model (parameters drawn once per model index)
//! and a sample (noise drawn once per repetition).

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::dataset::Dataset;
use crate::error::{MtsError, Result};
use crate::sim::sampling::{diagonal_gaussian, gaussian_with_factor, random_pairing, random_signs, standard_normal};
use crate::stats::SymMatrix;

/// Growth regime of the sample sizes when sweeping p.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// n grows with p (n = p).
    Ldl,
    /// n fixed at 50.
    Foldl,
}

pub const FOLDL_N: usize = 50;

impl Regime {
    pub fn sample_size(self, p: usize) -> usize {
        match self {
            Regime::Ldl => p,
            Regime::Foldl => FOLDL_N,
        }
    }
}

/// `p` values log-spaced from 10^lo to 10^hi, ascending.
pub fn log_spaced(p: usize, lo: f64, hi: f64) -> Vec<f64> {
    if p == 1 {
        return vec![10f64.powf(lo)];
    }
    (0..p)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (p - 1) as f64))
        .collect()
}

/// Product of Givens rotations by `phi_deg` degrees, one per coordinate pair,
/// applied in place to the rows of `m` (i.e. m ← R·m).
pub fn givens_rotate_rows(m: &mut DMatrix<f64>, pairs: &[(usize, usize)], phi_deg: f64) {
    let (s, c) = phi_deg.to_radians().sin_cos();
    for &(i, j) in pairs {
        for t in 0..m.ncols() {
            let (a, b) = (m[(i, t)], m[(j, t)]);
            m[(i, t)] = c * a - s * b;
            m[(j, t)] = s * a + c * b;
        }
    }
}

/// The orthogonal matrix R used by [`givens_rotate_rows`].
pub fn rotation_matrix(p: usize, pairs: &[(usize, usize)], phi_deg: f64) -> DMatrix<f64> {
    let mut r = DMatrix::identity(p, p);
    givens_rotate_rows(&mut r, pairs, phi_deg);
    r
}

/// R·diag(d)·Rᵀ.
fn rotated_diagonal(d: &[f64], pairs: &[(usize, usize)], phi_deg: f64) -> DMatrix<f64> {
    let r = rotation_matrix(d.len(), pairs, phi_deg);
    let scaled = DMatrix::from_fn(d.len(), d.len(), |i, j| r[(i, j)] * d[j]);
    let m = scaled * r.transpose();
    SymMatrix::new(m).into_matrix()
}

fn sqrt_vec(d: &[f64]) -> DVector<f64> {
    DVector::from_iterator(d.len(), d.iter().map(|v| v.sqrt()))
}

fn zero_mean_diag<R: Rng + ?Sized>(rng: &mut R, var: &[f64], n: usize) -> Dataset {
    diagonal_gaussian(rng, &DVector::zeros(var.len()), &sqrt_vec(var), n)
}

// Mean shrinkage toward auxiliary data sets.

/// Aux-set quality: η = (1/√p, 0.5, 1, 2)/5.
pub fn sim1_eta(p: usize) -> [f64; 4] {
    [1.0 / (p as f64).sqrt() / 5.0, 0.1, 0.2, 0.4]
}

#[derive(Debug, Clone)]
pub struct Sim1Model {
    pub n: usize,
    pub n_aux: Vec<usize>,
    pub true_mean: DVector<f64>,
    pub aux_means: Vec<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct MeanSample {
    pub primary: Dataset,
    pub aux: Vec<Dataset>,
}

impl Sim1Model {
    pub fn draw<R: Rng + ?Sized>(p: usize, regime: Regime, rng: &mut R) -> Result<Self> {
        if p < 2 {
            return Err(MtsError::InvalidParameter(format!("p must be at least 2, got {p}")));
        }
        let n = regime.sample_size(p);
        let aux_means = sim1_eta(p)
            .iter()
            .map(|&eta| random_signs(rng, p) * eta)
            .collect();
        Ok(Self {
            n,
            n_aux: vec![n; 4],
            true_mean: DVector::zeros(p),
            aux_means,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MeanSample {
        let p = self.true_mean.len();
        let ones = DVector::from_element(p, 1.0);
        let primary = diagonal_gaussian(rng, &self.true_mean, &ones, self.n);
        let aux = self
            .aux_means
            .iter()
            .zip(&self.n_aux)
            .map(|(m, &n)| diagonal_gaussian(rng, m, &ones, n))
            .collect();
        MeanSample { primary, aux }
    }
}

/// One draw of the first scenario: primary data, aux data, true mean.
pub fn gen_sim1<R: Rng + ?Sized>(p: usize, regime: Regime, rng: &mut R) -> Result<(Dataset, Vec<Dataset>, DVector<f64>)> {
    let model = Sim1Model::draw(p, regime, rng)?;
    let s = model.sample(rng);
    Ok((s.primary, s.aux, model.true_mean))
}

// Two-class mean shrinkage for LDA.

pub const SIM2_P: usize = 50;
pub const SIM2_N: usize = 50;
pub const SIM2_N_AUX: usize = 100;
pub const SPIKE_FACTOR: f64 = 100.0;
pub const BAYES_ACCURACY: f64 = 0.8;

/// Per-dimension class mean difference giving the target Bayes accuracy
/// with `informative` unit-variance dimensions.
pub fn sim2_delta(informative: usize) -> f64 {
    2.0 * normal_quantile(BAYES_ACCURACY) / (informative as f64).sqrt()
}

/// Standard normal quantile, Newton-polished against the CDF.
pub fn normal_quantile(q: f64) -> f64 {
    let n = Normal::standard();
    let mut x = n.inverse_cdf(q);
    for _ in 0..2 {
        let d = n.pdf(x);
        if d > 0.0 {
            x -= (n.cdf(x) - q) / d;
        }
    }
    x
}

#[derive(Debug, Clone)]
pub struct Sim2Model {
    pub n: usize,
    pub n_aux: Vec<usize>,
    /// Diagonal of the shared class covariance.
    pub gamma: Vec<f64>,
    pub mean_a: DVector<f64>,
    pub mean_b: DVector<f64>,
    pub aux_means_a: Vec<DVector<f64>>,
    pub aux_means_b: Vec<DVector<f64>>,
    /// Index of the spiked (non-discriminative) coordinate, if any.
    pub spike: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TwoClassMeanSample {
    pub a: MeanSample,
    pub b: MeanSample,
}

impl Sim2Model {
    pub fn draw<R: Rng + ?Sized>(p: usize, kappa: f64, spike: bool, rng: &mut R) -> Result<Self> {
        if p < 2 {
            return Err(MtsError::InvalidParameter(format!("p must be at least 2, got {p}")));
        }
        if !kappa.is_finite() {
            return Err(MtsError::InvalidParameter("kappa must be finite".into()));
        }
        let mut gamma = log_spaced(p, -1.0, 1.0);
        let spike = spike.then_some(p - 1);
        let informative = if spike.is_some() { p - 1 } else { p };
        let delta = sim2_delta(informative);
        let mut unit_diff = DVector::from_element(p, delta / 2.0);
        if let Some(s) = spike {
            gamma[s] *= SPIKE_FACTOR;
            unit_diff[s] = 0.0;
        }
        let scale = sqrt_vec(&gamma);
        let eta = [0.25, 0.5, 1.0, 2.0].map(|e| 10f64.powf(kappa) * e);
        let mut offsets = |base: &DVector<f64>| -> Vec<DVector<f64>> {
            eta.iter()
                .map(|&e| {
                    let mut off = random_signs(rng, p) * e;
                    if let Some(s) = spike {
                        off[s] = 0.0;
                    }
                    (base + off).component_mul(&scale)
                })
                .collect()
        };
        let aux_means_a = offsets(&unit_diff);
        let aux_means_b = offsets(&(-&unit_diff));
        Ok(Self {
            n: SIM2_N,
            n_aux: vec![SIM2_N_AUX; 4],
            mean_a: unit_diff.component_mul(&scale),
            mean_b: -unit_diff.component_mul(&scale),
            gamma,
            aux_means_a,
            aux_means_b,
            spike,
        })
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.gamma))
    }

    /// Accuracy of the Bayes-optimal classifier, Φ(d/2) for Mahalanobis
    /// distance d between the class means.
    pub fn bayes_accuracy(&self) -> f64 {
        let d2: f64 = (0..self.gamma.len())
            .map(|i| (self.mean_a[i] - self.mean_b[i]).powi(2) / self.gamma[i])
            .sum();
        Normal::standard().cdf(d2.sqrt() / 2.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TwoClassMeanSample {
        let scale = sqrt_vec(&self.gamma);
        let mut draw = |mean: &DVector<f64>, aux: &[DVector<f64>]| MeanSample {
            primary: diagonal_gaussian(rng, mean, &scale, self.n),
            aux: aux
                .iter()
                .zip(&self.n_aux)
                .map(|(m, &n)| diagonal_gaussian(rng, m, &scale, n))
                .collect(),
        };
        let a = draw(&self.mean_a, &self.aux_means_a);
        let b = draw(&self.mean_b, &self.aux_means_b);
        TwoClassMeanSample { a, b }
    }
}

/// One draw of the LDA scenario at p = 50.
pub fn gen_sim2<R: Rng + ?Sized>(kappa: f64, spike: bool, rng: &mut R) -> Result<(Sim2Model, TwoClassMeanSample)> {
    let model = Sim2Model::draw(SIM2_P, kappa, spike, rng)?;
    let s = model.sample(rng);
    Ok((model, s))
}

// Covariance shrinkage toward auxiliary data sets.

/// Aux-set quality: η = (1/√p, 1, 2.5, 5)/10.
pub fn sim3_eta(p: usize) -> [f64; 4] {
    [1.0 / (p as f64).sqrt() / 10.0, 0.1, 0.25, 0.5]
}

/// Zero-mean covariance problem with diagonal covariances.
#[derive(Debug, Clone)]
pub struct DiagCovModel {
    pub n: usize,
    pub n_aux: Vec<usize>,
    pub c: Vec<f64>,
    pub aux_c: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct CovSample {
    pub primary: Dataset,
    pub aux: Vec<Dataset>,
}

impl DiagCovModel {
    pub fn sim3(p: usize, regime: Regime) -> Result<Self> {
        if p < 4 {
            return Err(MtsError::InvalidParameter(format!("p must be at least 4, got {p}")));
        }
        let n = regime.sample_size(p);
        let c = log_spaced(p, -1.0, 1.0);
        let aux_c = sim3_eta(p)
            .iter()
            .map(|&eta| {
                let mut ck = c.clone();
                ck[p - 1] = eta * p as f64;
                ck
            })
            .collect();
        Ok(Self {
            n,
            n_aux: vec![n; 4],
            c,
            aux_c,
        })
    }

    pub fn true_covariance(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.c))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CovSample {
        let primary = zero_mean_diag(rng, &self.c, self.n);
        let aux = self
            .aux_c
            .iter()
            .zip(&self.n_aux)
            .map(|(c, &n)| zero_mean_diag(rng, c, n))
            .collect();
        CovSample { primary, aux }
    }
}

/// One draw of the covariance scenario with aux sets differing in the top
/// eigenvalue. Returns (primary, aux, true covariance).
pub fn gen_sim3<R: Rng + ?Sized>(p: usize, regime: Regime, rng: &mut R) -> Result<(Dataset, Vec<Dataset>, DMatrix<f64>)> {
    let model = DiagCovModel::sim3(p, regime)?;
    let s = model.sample(rng);
    Ok((s.primary, s.aux, model.true_covariance()))
}

// Covariance shrinkage toward identity and rotated aux sets.

#[derive(Debug, Clone)]
pub struct Sim4Model {
    pub n: usize,
    pub n_aux: Vec<usize>,
    pub c: Vec<f64>,
    pub phi: f64,
    /// Coordinate pairing of each aux set's rotation.
    pub pairings: Vec<Vec<(usize, usize)>>,
}

impl Sim4Model {
    pub fn draw<R: Rng + ?Sized>(p: usize, phi: f64, rng: &mut R) -> Result<Self> {
        if p < 4 || p % 2 != 0 {
            return Err(MtsError::InvalidParameter(format!("p must be even and at least 4, got {p}")));
        }
        if !(0.0..=90.0).contains(&phi) {
            return Err(MtsError::InvalidParameter(format!("phi must be in [0, 90], got {phi}")));
        }
        let coords: Vec<usize> = (0..p).collect();
        let pairings = (0..4).map(|_| random_pairing(rng, &coords)).collect();
        Ok(Self {
            n: p,
            n_aux: vec![p / 2, p, 2 * p, 4 * p],
            c: log_spaced(p, -1.0, 1.0),
            phi,
            pairings,
        })
    }

    pub fn true_covariance(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.c))
    }

    pub fn aux_covariance(&self, k: usize) -> DMatrix<f64> {
        rotated_diagonal(&self.c, &self.pairings[k], self.phi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CovSample {
        let primary = zero_mean_diag(rng, &self.c, self.n);
        let aux = self
            .pairings
            .iter()
            .zip(&self.n_aux)
            .map(|(pairs, &n)| {
                let mut m = zero_mean_diag(rng, &self.c, n).into_matrix();
                givens_rotate_rows(&mut m, pairs, self.phi);
                Dataset::new(m).expect("generated data is valid")
            })
            .collect();
        CovSample { primary, aux }
    }
}

/// One draw of the identity-plus-rotated-aux scenario. Returns (primary,
/// aux, true covariance).
pub fn gen_sim4<R: Rng + ?Sized>(p: usize, phi: f64, rng: &mut R) -> Result<(Dataset, Vec<Dataset>, DMatrix<f64>)> {
    let model = Sim4Model::draw(p, phi, rng)?;
    let s = model.sample(rng);
    Ok((s.primary, s.aux, model.true_covariance()))
}

// Two-class covariance shrinkage for CSP.

pub const SIM5_P: usize = 50;
pub const SIM5_N: usize = 200;
pub const SIM5_TRIAL_LEN: usize = 20;
pub const SIM5_RESCALED: usize = 10;
pub const SIM5_PHI: [f64; 4] = [0.0, 5.0, 10.0, 90.0];

/// Multipliers 1 + i/P, i = 1..P.
pub fn rescale_multipliers() -> Vec<f64> {
    (1..=SIM5_RESCALED)
        .map(|i| 1.0 + i as f64 / SIM5_RESCALED as f64)
        .collect()
}

#[derive(Debug, Clone)]
pub struct Sim5Model {
    pub n: usize,
    pub n_aux: Vec<usize>,
    pub trial_len: usize,
    pub cov_a: DMatrix<f64>,
    pub cov_b: DMatrix<f64>,
    pub aux_cov_a: Vec<DMatrix<f64>>,
    pub aux_cov_b: Vec<DMatrix<f64>>,
    pub spike: Option<usize>,
    factors: Factors,
}

#[derive(Debug, Clone)]
struct Factors {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    aux_a: Vec<DMatrix<f64>>,
    aux_b: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone)]
pub struct CspSample {
    pub a: CovSample,
    pub b: CovSample,
    /// Test trials, each p × trial_len.
    pub test_a: Vec<DMatrix<f64>>,
    pub test_b: Vec<DMatrix<f64>>,
}

fn factor_of(c: &DMatrix<f64>) -> DMatrix<f64> {
    c.clone()
        .cholesky()
        .expect("generated covariance is positive definite")
        .l()
}

impl Sim5Model {
    pub fn draw<R: Rng + ?Sized>(p: usize, w: f64, phis: &[f64], spike: bool, rng: &mut R) -> Result<Self> {
        if p < 4 || p < SIM5_RESCALED + 1 {
            return Err(MtsError::InvalidParameter(format!(
                "p must be at least {}, got {p}",
                SIM5_RESCALED + 1
            )));
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(MtsError::InvalidParameter(format!("w must be in [0, 1], got {w}")));
        }
        if phis.is_empty() {
            return Err(MtsError::NoTargets);
        }
        if let Some(bad) = phis.iter().find(|f| !(0.0..=90.0).contains(*f)) {
            return Err(MtsError::InvalidParameter(format!("phi must be in [0, 90], got {bad}")));
        }
        let mut base = log_spaced(p, -1.0, 1.0);
        let spike = spike.then_some(p - 1);
        if let Some(s) = spike {
            base[s] *= SPIKE_FACTOR;
        }
        let free: Vec<usize> = (0..p).filter(|&i| Some(i) != spike).collect();
        let multipliers = rescale_multipliers();
        let rescaled = |rng: &mut R| -> Vec<f64> {
            let mut d = base.clone();
            for (&i, m) in free.choose_multiple(rng, SIM5_RESCALED).zip(&multipliers) {
                d[i] *= m;
            }
            d
        };
        let diag = |d: &[f64]| DMatrix::from_diagonal(&DVector::from_column_slice(d));
        let cov_a = diag(&rescaled(rng));
        let cov_b = diag(&rescaled(rng));
        let mut aux_cov_a = Vec::with_capacity(phis.len());
        let mut aux_cov_b = Vec::with_capacity(phis.len());
        for &phi in phis {
            let da = rescaled(rng);
            let db = rescaled(rng);
            let pairs = random_pairing(rng, &free);
            let blend = |d: &[f64], class: &DMatrix<f64>| {
                rotated_diagonal(d, &pairs, phi) * (1.0 - w) + class * w
            };
            aux_cov_a.push(blend(&da, &cov_a));
            aux_cov_b.push(blend(&db, &cov_b));
        }
        let factors = Factors {
            a: factor_of(&cov_a),
            b: factor_of(&cov_b),
            aux_a: aux_cov_a.iter().map(factor_of).collect(),
            aux_b: aux_cov_b.iter().map(factor_of).collect(),
        };
        Ok(Self {
            n: SIM5_N,
            n_aux: vec![SIM5_N; phis.len()],
            trial_len: SIM5_TRIAL_LEN,
            cov_a,
            cov_b,
            aux_cov_a,
            aux_cov_b,
            spike,
            factors,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, test_trials: usize, rng: &mut R) -> CspSample {
        let p = self.cov_a.nrows();
        let zero = DVector::zeros(p);
        let f = &self.factors;
        let mut class = |main: &DMatrix<f64>, aux: &[DMatrix<f64>]| CovSample {
            primary: gaussian_with_factor(rng, &zero, main, self.n),
            aux: aux
                .iter()
                .zip(&self.n_aux)
                .map(|(l, &n)| gaussian_with_factor(rng, &zero, l, n))
                .collect(),
        };
        let a = class(&f.a, &f.aux_a);
        let b = class(&f.b, &f.aux_b);
        let mut trials = |l: &DMatrix<f64>| -> Vec<DMatrix<f64>> {
            (0..test_trials)
                .map(|_| l * standard_normal(rng, p, self.trial_len))
                .collect()
        };
        let test_a = trials(&f.a);
        let test_b = trials(&f.b);
        CspSample { a, b, test_a, test_b }
    }
}

/// One draw of the CSP scenario at p = 50 with the default angles.
pub fn gen_sim5<R: Rng + ?Sized>(w: f64, phis: &[f64], spike: bool, test_trials: usize, rng: &mut R) -> Result<(Sim5Model, CspSample)> {
    let model = Sim5Model::draw(SIM5_P, w, phis, spike, rng)?;
    let s = model.sample(test_trials, rng);
    Ok((model, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::eig_sym;
    use crate::testutil::rng;

    #[test]
    fn sim1_true_mean_and_norms() {
        let mut r = rng(1);
        for p in [4usize, 25, 100] {
            let m = Sim1Model::draw(p, Regime::Ldl, &mut r).unwrap();
            assert!(m.true_mean.iter().all(|&v| v == 0.0));
            assert!((m.aux_means[0].norm_squared() - 1.0 / 25.0).abs() < 1e-12);
            assert!((m.aux_means[3].norm_squared() - 0.16 * p as f64).abs() < 1e-9);
            let s = m.sample(&mut r);
            assert_eq!(s.primary.n(), p);
            assert!(s.aux.iter().all(|d| d.n() == p && d.p() == p));
        }
        let m = Sim1Model::draw(200, Regime::Foldl, &mut r).unwrap();
        assert_eq!(m.n, 50);
        assert!(m.n_aux.iter().all(|&n| n == 50));
        assert!(Sim1Model::draw(1, Regime::Ldl, &mut r).is_err());
    }

    #[test]
    fn sim1_signs_are_independent_per_dataset() {
        let mut r = rng(2);
        let m = Sim1Model::draw(400, Regime::Ldl, &mut r).unwrap();
        let s2 = m.aux_means[1].map(f64::signum);
        let s3 = m.aux_means[2].map(f64::signum);
        let agree = s2.iter().zip(s3.iter()).filter(|(a, b)| a == b).count();
        assert!((150..250).contains(&agree));
    }

    #[test]
    fn sim2_bayes_accuracy_is_calibrated() {
        let mut r = rng(3);
        for spike in [false, true] {
            let m = Sim2Model::draw(SIM2_P, 0.0, spike, &mut r).unwrap();
            assert!((m.bayes_accuracy() - 0.8).abs() < 1e-12, "{}", m.bayes_accuracy());
        }
        assert!((sim2_delta(1) - 1.6832424671458293).abs() < 1e-9);
    }

    #[test]
    fn sim2_spike_direction_is_non_discriminative() {
        let mut r = rng(4);
        let m = Sim2Model::draw(SIM2_P, 1.0, true, &mut r).unwrap();
        let s = m.spike.unwrap();
        assert_eq!(m.mean_a[s] - m.mean_b[s], 0.0);
        assert!(m.aux_means_a.iter().chain(&m.aux_means_b).all(|mu| mu[s] == 0.0));
        assert!((m.gamma[s] - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn sim2_small_kappa_aux_close_to_class_means() {
        let mut r = rng(5);
        let m = Sim2Model::draw(SIM2_P, -8.0, false, &mut r).unwrap();
        for mu in &m.aux_means_a {
            assert!((mu - &m.mean_a).amax() < 1e-7);
        }
        for mu in &m.aux_means_b {
            assert!((mu - &m.mean_b).amax() < 1e-7);
        }
    }

    #[test]
    fn sim3_covariances() {
        for p in [16usize, 100] {
            let m = DiagCovModel::sim3(p, Regime::Ldl).unwrap();
            let d = &m.c;
            assert!((d[p - 1] / d[0] - 100.0).abs() < 1e-9);
            let diff: f64 = m.aux_c[0]
                .iter()
                .zip(d)
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            let expect = ((p as f64).sqrt() / 10.0 - 10.0).powi(2);
            assert!((diff - expect).abs() < 1e-9);
        }
        let m = DiagCovModel::sim3(100, Regime::Foldl).unwrap();
        assert_eq!(m.n, 50);
        assert!(m.n_aux.iter().all(|&n| n == 50));
    }

    #[test]
    fn sim4_rotations() {
        let mut r = rng(6);
        let m0 = Sim4Model::draw(8, 0.0, &mut r).unwrap();
        for k in 0..4 {
            assert!((m0.aux_covariance(k) - m0.true_covariance()).amax() < 1e-15);
        }
        let m = Sim4Model::draw(10, 37.0, &mut r).unwrap();
        let c_eigs = eig_sym(&SymMatrix::new(m.true_covariance())).unwrap();
        for k in 0..4 {
            let e = eig_sym(&SymMatrix::new(m.aux_covariance(k))).unwrap();
            assert!((e.eigenvalues - &c_eigs.eigenvalues).amax() < 1e-12);
        }
        assert_eq!(m.n_aux, vec![5, 10, 20, 40]);

        let c = rotated_diagonal(&[0.1, 10.0], &[(0, 1)], 90.0);
        assert!((c - DMatrix::from_diagonal(&DVector::from_vec(vec![10.0, 0.1]))).amax() < 1e-12);
        assert!(Sim4Model::draw(7, 0.0, &mut r).is_err());
        assert!(Sim4Model::draw(8, 91.0, &mut r).is_err());
    }

    #[test]
    fn givens_rows_match_matrix() {
        let mut r = rng(7);
        let pairs = random_pairing(&mut r, &[0, 1, 2, 3, 4, 5]);
        let x = standard_normal(&mut r, 6, 3);
        let mut y = x.clone();
        givens_rotate_rows(&mut y, &pairs, 23.0);
        let rot = rotation_matrix(6, &pairs, 23.0);
        assert!((rot * x - y).amax() < 1e-14);
        let rot = rotation_matrix(6, &pairs, 23.0);
        assert!((&rot * rot.transpose() - DMatrix::identity(6, 6)).amax() < 1e-14);
    }

    #[test]
    fn sim5_blend_endpoints_and_spike() {
        let mut r = rng(8);
        let m = Sim5Model::draw(SIM5_P, 1.0, &SIM5_PHI, false, &mut r).unwrap();
        for k in 0..4 {
            assert!((&m.aux_cov_a[k] - &m.cov_a).amax() < 1e-12);
            assert!((&m.aux_cov_b[k] - &m.cov_b).amax() < 1e-12);
        }
        let m = Sim5Model::draw(SIM5_P, 0.0, &[0.0], false, &mut r).unwrap();
        // φ = 0 and w = 0: a diagonal with exactly 10 rescaled entries
        let base = log_spaced(SIM5_P, -1.0, 1.0);
        let aux = &m.aux_cov_a[0];
        assert!((aux - DMatrix::from_diagonal(&aux.diagonal())).amax() == 0.0);
        let mut ratios: Vec<f64> = (0..SIM5_P).map(|i| aux[(i, i)] / base[i]).collect();
        ratios.sort_by(f64::total_cmp);
        for (got, want) in ratios[SIM5_P - 10..].iter().zip(rescale_multipliers()) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(ratios[..SIM5_P - 10].iter().all(|&v| (v - 1.0).abs() < 1e-12));

        let m = Sim5Model::draw(SIM5_P, 0.3, &SIM5_PHI, true, &mut r).unwrap();
        let s = m.spike.unwrap();
        let spiked = base[s] * SPIKE_FACTOR;
        for c in std::iter::once(&m.cov_a).chain(&m.aux_cov_a).chain(&m.aux_cov_b) {
            assert!((c[(s, s)] - spiked).abs() < 1e-9);
            assert!((0..SIM5_P).filter(|&j| j != s).all(|j| c[(s, j)] == 0.0));
        }
        let sample = m.sample(7, &mut r);
        assert_eq!(sample.test_a.len(), 7);
        assert_eq!(sample.test_b[0].shape(), (SIM5_P, SIM5_TRIAL_LEN));
        assert_eq!(sample.a.aux.len(), 4);
        assert!(Sim5Model::draw(SIM5_P, 1.5, &SIM5_PHI, false, &mut r).is_err());
    }
}
