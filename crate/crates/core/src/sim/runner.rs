//! Seeded Monte Carlo runner over the simulation scenarios.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cov::{covariance_for, mts_cov_prepared, CovMtsOptions, PreparedTarget, TargetSpec};
use crate::dataset::{sample_mean, Dataset};
use crate::error::{MtsError, Result};
use crate::mean::{mts_mean, mts_mean_with_targets, MeanMtsOptions};
use crate::sim::csp::{csp_features, csp_filters};
use crate::sim::generators::{
    CovSample, CspSample, DiagCovModel, MeanSample, Regime, Sim1Model, Sim2Model, Sim4Model, Sim5Model,
    SIM2_P, SIM5_P, SIM5_PHI,
};
use crate::sim::lda::lda_train;
use crate::stats::{pooled_covariance, SymMatrix, WhitenMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Sim1MeanLdl,
    Sim1MeanFoldl,
    Sim2Lda,
    Sim3CovLdl,
    Sim3CovFoldl,
    Sim4CovTargets,
    Sim5Csp,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Sim1MeanLdl,
        Scenario::Sim1MeanFoldl,
        Scenario::Sim2Lda,
        Scenario::Sim3CovLdl,
        Scenario::Sim3CovFoldl,
        Scenario::Sim4CovTargets,
        Scenario::Sim5Csp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Sim1MeanLdl => "sim1_mean_ldl",
            Scenario::Sim1MeanFoldl => "sim1_mean_foldl",
            Scenario::Sim2Lda => "sim2_lda",
            Scenario::Sim3CovLdl => "sim3_cov_ldl",
            Scenario::Sim3CovFoldl => "sim3_cov_foldl",
            Scenario::Sim4CovTargets => "sim4_cov_targets",
            Scenario::Sim5Csp => "sim5_csp",
        }
    }

    /// Name of the swept parameter.
    pub fn sweep_parameter(self) -> &'static str {
        match self {
            Scenario::Sim1MeanLdl | Scenario::Sim1MeanFoldl | Scenario::Sim3CovLdl | Scenario::Sim3CovFoldl => "p",
            Scenario::Sim2Lda => "kappa",
            Scenario::Sim4CovTargets => "phi",
            Scenario::Sim5Csp => "w",
        }
    }

    pub fn metric(self) -> Metric {
        match self {
            Scenario::Sim2Lda | Scenario::Sim5Csp => Metric::Accuracy,
            _ => Metric::SquaredError,
        }
    }

    /// Estimators evaluated in each repetition, in output order.
    pub fn estimators(self) -> &'static [&'static str] {
        match self {
            Scenario::Sim1MeanLdl | Scenario::Sim1MeanFoldl | Scenario::Sim3CovLdl | Scenario::Sim3CovFoldl => {
                &["sample", "sts_1", "sts_2", "sts_3", "sts_4", "sts_joint", "mts"]
            }
            Scenario::Sim2Lda | Scenario::Sim5Csp => &["sample", "pooled", "sts_joint", "mts", "wmts"],
            Scenario::Sim4CovTargets => &["sample", "sts_id", "sts_1", "sts_2", "sts_3", "sts_4", "mts"],
        }
    }

    /// Default sweep used when a config omits it.
    pub fn default_sweep(self) -> Vec<f64> {
        match self {
            Scenario::Sim1MeanLdl | Scenario::Sim1MeanFoldl | Scenario::Sim3CovLdl | Scenario::Sim3CovFoldl => {
                vec![25.0, 50.0, 100.0, 200.0, 400.0]
            }
            Scenario::Sim2Lda => vec![-2.0, -1.0, -0.5, 0.0, 0.5, 1.0],
            Scenario::Sim4CovTargets => vec![0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0],
            Scenario::Sim5Csp => vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = MtsError;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
                MtsError::InvalidParameter(format!(
                    "unknown scenario '{s}'; valid scenarios: {}",
                    valid.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    SquaredError,
    Accuracy,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::SquaredError => "squared_error",
            Metric::Accuracy => "accuracy",
        }
    }
}

fn default_reps_model() -> usize {
    100
}
fn default_reps_noise() -> usize {
    5
}
fn default_test_trials() -> usize {
    50
}
fn default_train_trials() -> usize {
    10
}
fn default_m_per_class() -> usize {
    3
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Scenario name; kept as text so that unknown names produce a helpful
    /// error listing the valid ones.
    pub scenario: String,
    #[serde(default)]
    pub sweep: Vec<f64>,
    #[serde(default = "default_reps_model")]
    pub reps_model: usize,
    #[serde(default = "default_reps_noise")]
    pub reps_noise: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Dimension for scenarios that sweep something else (sim2, sim4, sim5).
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(default)]
    pub spike: bool,
    /// Weight constraint for the mean scenarios.
    #[serde(default = "default_true")]
    pub weight_constraint: bool,
    /// Test trials per class (sim5).
    #[serde(default = "default_test_trials")]
    pub test_trials: usize,
    /// Training trials per class the primary data is split into (sim5).
    #[serde(default = "default_train_trials")]
    pub train_trials: usize,
    #[serde(default = "default_m_per_class")]
    pub m_per_class: usize,
    /// Aux rotation angles in degrees (sim5).
    #[serde(default)]
    pub phi_list: Option<Vec<f64>>,
}

impl SimConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario: scenario.name().to_string(),
            sweep: scenario.default_sweep(),
            reps_model: default_reps_model(),
            reps_noise: default_reps_noise(),
            seed: None,
            p: None,
            spike: false,
            weight_constraint: true,
            test_trials: default_test_trials(),
            train_trials: default_train_trials(),
            m_per_class: default_m_per_class(),
            phi_list: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        self.scenario.parse()
    }

    /// Sweep values, falling back to the scenario default.
    pub fn sweep_values(&self) -> Result<Vec<f64>> {
        let sc = self.scenario()?;
        Ok(if self.sweep.is_empty() {
            sc.default_sweep()
        } else {
            self.sweep.clone()
        })
    }

    pub fn dimension(&self) -> Result<usize> {
        Ok(match self.scenario()? {
            Scenario::Sim2Lda => self.p.unwrap_or(SIM2_P),
            Scenario::Sim4CovTargets => self.p.unwrap_or(100),
            Scenario::Sim5Csp => self.p.unwrap_or(SIM5_P),
            _ => 0,
        })
    }

    pub fn phis(&self) -> Vec<f64> {
        self.phi_list.clone().unwrap_or_else(|| SIM5_PHI.to_vec())
    }

    pub fn validate(&self) -> Result<()> {
        let sc = self.scenario()?;
        let bad = |m: String| Err(MtsError::InvalidParameter(m));
        if self.reps_model == 0 || self.reps_noise == 0 {
            return bad("reps_model and reps_noise must be at least 1".into());
        }
        let sweep = self.sweep_values()?;
        if let Some(v) = sweep.iter().find(|v| !v.is_finite()) {
            return bad(format!("sweep value {v} is not finite"));
        }
        let int_at_least = |min: f64| {
            sweep
                .iter()
                .find(|&&v| v.fract() != 0.0 || v < min)
                .map(|v| format!("sweep value {v} must be an integer p >= {min}"))
        };
        let p = self.dimension()?;
        match sc {
            Scenario::Sim1MeanLdl | Scenario::Sim1MeanFoldl => {
                if let Some(m) = int_at_least(2.0) {
                    return bad(m);
                }
            }
            Scenario::Sim3CovLdl | Scenario::Sim3CovFoldl => {
                if let Some(m) = int_at_least(4.0) {
                    return bad(m);
                }
            }
            Scenario::Sim2Lda => {
                if p < 2 {
                    return bad(format!("p must be at least 2, got {p}"));
                }
            }
            Scenario::Sim4CovTargets => {
                if p < 4 || p % 2 != 0 {
                    return bad(format!("p must be even and at least 4, got {p}"));
                }
                if let Some(v) = sweep.iter().find(|v| !(0.0..=90.0).contains(*v)) {
                    return bad(format!("phi must be in [0, 90], got {v}"));
                }
            }
            Scenario::Sim5Csp => {
                if let Some(v) = sweep.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                    return bad(format!("w must be in [0, 1], got {v}"));
                }
                if p < 11 {
                    return bad(format!("p must be at least 11, got {p}"));
                }
                if self.m_per_class == 0 || 2 * self.m_per_class > p {
                    return bad(format!("m_per_class must be in 1..={}", p / 2));
                }
                if self.test_trials == 0 {
                    return bad("test_trials must be at least 1".into());
                }
                if self.train_trials < 2 || self.train_trials > 100 {
                    return bad("train_trials must be in 2..=100".into());
                }
                let phis = self.phis();
                if phis.is_empty() {
                    return bad("phi_list must be nonempty".into());
                }
                if let Some(v) = phis.iter().find(|v| !(0.0..=90.0).contains(*v)) {
                    return bad(format!("phi must be in [0, 90], got {v}"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub sweep_index: usize,
    pub sweep_value: f64,
    pub model: usize,
    pub rep: usize,
    pub estimator: String,
    pub metric: Metric,
    /// Squared error or accuracy; NaN when the estimator failed.
    pub value: f64,
    pub lambda: Vec<f64>,
    pub seed_used: u64,
    /// None on success, otherwise the error message.
    pub error: Option<String>,
}

impl RunRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    fn sort_key(&self, order: &[&str]) -> (usize, usize, usize, usize) {
        let est = order.iter().position(|e| *e == self.estimator).unwrap_or(usize::MAX);
        (self.sweep_index, self.model, self.rep, est)
    }
}

pub const CSV_HEADER: [&str; 10] = [
    "sweep_index",
    "sweep_value",
    "model",
    "rep",
    "estimator",
    "metric",
    "value",
    "lambda",
    "seed_used",
    "status",
];

/// Shortest round-trip decimal.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Record table as CSV with the [`CSV_HEADER`] columns. λ entries are
/// separated by ';'. `status` is "ok" or "failed: <message>".
pub fn records_to_csv(records: &[RunRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| MtsError::InvalidParameter(format!("CSV encoding failed: {e}"));
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        let lambda: Vec<String> = r.lambda.iter().map(|&v| fmt_f64(v)).collect();
        let status = match &r.error {
            None => "ok".to_string(),
            Some(e) => format!("failed: {e}"),
        };
        w.write_record([
            r.sweep_index.to_string(),
            fmt_f64(r.sweep_value),
            r.model.to_string(),
            r.rep.to_string(),
            r.estimator.clone(),
            r.metric.name().to_string(),
            fmt_f64(r.value),
            lambda.join(";"),
            r.seed_used.to_string(),
            status,
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| MtsError::InvalidParameter(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Marker rep index for the model-level stream.
pub const MODEL_STREAM: u64 = u64::MAX;

/// Seed of the random stream for one (sweep point, model, repetition).
pub fn stream_seed(seed: u64, sweep: u64, model: u64, rep: u64) -> u64 {
    let mut h = splitmix64(seed);
    for v in [sweep, model, rep] {
        h = splitmix64(h ^ splitmix64(v));
    }
    h
}

type EstimatorOutput = (&'static str, Result<(f64, Vec<f64>)>);
type Outcome = std::result::Result<(f64, Vec<f64>), String>;

enum Model {
    Sim1(Sim1Model),
    Sim2(Sim2Model),
    Diag(DiagCovModel),
    Sim4(Sim4Model),
    Sim5(Box<Sim5Model>),
}

fn draw_model(cfg: &SimConfig, sc: Scenario, value: f64, rng: &mut ChaCha8Rng) -> Result<Model> {
    let p = cfg.dimension()?;
    Ok(match sc {
        Scenario::Sim1MeanLdl => Model::Sim1(Sim1Model::draw(value as usize, Regime::Ldl, rng)?),
        Scenario::Sim1MeanFoldl => Model::Sim1(Sim1Model::draw(value as usize, Regime::Foldl, rng)?),
        Scenario::Sim2Lda => Model::Sim2(Sim2Model::draw(p, value, cfg.spike, rng)?),
        Scenario::Sim3CovLdl => Model::Diag(DiagCovModel::sim3(value as usize, Regime::Ldl)?),
        Scenario::Sim3CovFoldl => Model::Diag(DiagCovModel::sim3(value as usize, Regime::Foldl)?),
        Scenario::Sim4CovTargets => Model::Sim4(Sim4Model::draw(p, value, rng)?),
        Scenario::Sim5Csp => Model::Sim5(Box::new(Sim5Model::draw(p, value, &cfg.phis(), cfg.spike, rng)?)),
    })
}

fn evaluate(cfg: &SimConfig, model: &Model, rng: &mut ChaCha8Rng) -> Vec<EstimatorOutput> {
    match model {
        Model::Sim1(m) => eval_mean_aux(&m.sample(rng), &m.true_mean, cfg.weight_constraint),
        Model::Sim2(m) => eval_lda(m, &m.sample(rng), cfg.weight_constraint),
        Model::Diag(m) => eval_cov(&m.sample(rng), &m.true_covariance(), false),
        Model::Sim4(m) => eval_cov(&m.sample(rng), &m.true_covariance(), true),
        Model::Sim5(m) => eval_csp(cfg, &m.sample(cfg.test_trials, rng)),
    }
}

fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn average(vs: &[DVector<f64>]) -> DVector<f64> {
    let mut acc = DVector::zeros(vs[0].len());
    for v in vs {
        acc += v;
    }
    acc / vs.len() as f64
}

fn eval_mean_aux(s: &MeanSample, truth: &DVector<f64>, weight_constraint: bool) -> Vec<EstimatorOutput> {
    let opts = MeanMtsOptions {
        weight_constraint,
        ..MeanMtsOptions::default()
    };
    let err = |est: &DVector<f64>| (est - truth).norm_squared();
    let x = &s.primary;
    let means: Vec<DVector<f64>> = s.aux.iter().map(sample_mean).collect();
    let sizes: Vec<usize> = s.aux.iter().map(Dataset::n).collect();
    let sts = |targets: &[DVector<f64>], sizes: &[usize]| {
        mts_mean_with_targets(x, targets, sizes, &opts).map(|r| (err(&r.estimate), vec_of(&r.lambda)))
    };
    let mut out: Vec<EstimatorOutput> = vec![("sample", Ok((err(&sample_mean(x)), Vec::new())))];
    for (k, name) in ["sts_1", "sts_2", "sts_3", "sts_4"].into_iter().enumerate() {
        out.push((name, sts(&means[k..k + 1], &sizes[k..k + 1])));
    }
    out.push(("sts_joint", sts(&[average(&means)], &[sizes.iter().sum()])));
    out.push((
        "mts",
        mts_mean_with_targets(x, &means, &sizes, &opts).map(|r| (err(&r.estimate), vec_of(&r.lambda))),
    ));
    out
}

/// Mean estimates for both classes by one estimator.
fn class_means(
    s: &MeanSample,
    estimator: &str,
    weight_constraint: bool,
    whitening_cov: &SymMatrix,
) -> Result<(DVector<f64>, Vec<f64>)> {
    let x = &s.primary;
    let means: Vec<DVector<f64>> = s.aux.iter().map(sample_mean).collect();
    let sizes: Vec<usize> = s.aux.iter().map(Dataset::n).collect();
    let opts = MeanMtsOptions {
        weight_constraint,
        ..MeanMtsOptions::default()
    };
    match estimator {
        "sample" => Ok((sample_mean(x), Vec::new())),
        "pooled" => {
            let mut all = means.clone();
            all.push(sample_mean(x));
            Ok((average(&all), Vec::new()))
        }
        "sts_joint" => {
            let r = mts_mean_with_targets(x, &[average(&means)], &[sizes.iter().sum()], &opts)?;
            Ok((r.estimate, vec_of(&r.lambda)))
        }
        "mts" => {
            let r = mts_mean(x, &s.aux, &opts)?;
            Ok((r.estimate, vec_of(&r.lambda)))
        }
        "wmts" => {
            let opts = MeanMtsOptions {
                whiten: Some(WhitenMode::Full),
                covariance_for_whitening: Some(whitening_cov.clone()),
                ..opts
            };
            let r = mts_mean_with_targets(x, &means, &sizes, &opts)?;
            Ok((r.estimate, vec_of(&r.lambda)))
        }
        other => Err(MtsError::InvalidParameter(format!("unknown estimator {other}"))),
    }
}

fn eval_lda(m: &Sim2Model, s: &crate::sim::generators::TwoClassMeanSample, weight_constraint: bool) -> Vec<EstimatorOutput> {
    let all: Vec<&Dataset> = std::iter::once(&s.a.primary)
        .chain(&s.a.aux)
        .chain(std::iter::once(&s.b.primary))
        .chain(&s.b.aux)
        .collect();
    let cov = pooled_covariance(&all);
    let truth_cov = m.covariance();
    Scenario::Sim2Lda
        .estimators()
        .iter()
        .map(|&name| {
            let res = (|| {
                let cov = cov
                    .as_ref()
                    .map_err(|e| MtsError::InvalidParameter(e.to_string()))?;
                let (ma, la) = class_means(&s.a, name, weight_constraint, cov)?;
                let (mb, lb) = class_means(&s.b, name, weight_constraint, cov)?;
                let lda = lda_train(&ma, &mb, cov, None)?;
                let acc = lda.gaussian_accuracy(&m.mean_a, &m.mean_b, &truth_cov);
                Ok((acc, la.into_iter().chain(lb).collect()))
            })();
            (name, res)
        })
        .collect()
}

fn eval_cov(s: &CovSample, truth: &DMatrix<f64>, identity_target: bool) -> Vec<EstimatorOutput> {
    let opts = CovMtsOptions {
        whiten: None,
        assume_zero_mean: true,
    };
    let x = &s.primary;
    let sm = covariance_for(x, true);
    let err = |est: &SymMatrix| (est.as_matrix() - truth).norm_squared();
    let aux: Vec<SymMatrix> = s.aux.iter().map(|d| covariance_for(d, true)).collect();
    let fit = |targets: Vec<PreparedTarget>| {
        mts_cov_prepared(x, &sm, &targets, &opts).map(|r| (err(&r.estimate), vec_of(&r.lambda)))
    };
    let mut out: Vec<EstimatorOutput> = vec![("sample", Ok((err(&sm), Vec::new())))];
    if identity_target {
        out.push(("sts_id", fit(vec![PreparedTarget::Structured(TargetSpec::IdentityScaled)])));
    }
    for (k, name) in ["sts_1", "sts_2", "sts_3", "sts_4"].into_iter().enumerate() {
        out.push((name, fit(vec![PreparedTarget::Matrix(aux[k].clone())])));
    }
    let mut all: Vec<PreparedTarget> = aux.iter().cloned().map(PreparedTarget::Matrix).collect();
    if identity_target {
        all.insert(0, PreparedTarget::Structured(TargetSpec::IdentityScaled));
    } else {
        out.push(("sts_joint", fit(vec![PreparedTarget::Matrix(average_sym(&aux))])));
    }
    out.push(("mts", fit(all)));
    out
}

fn average_sym(ms: &[SymMatrix]) -> SymMatrix {
    let p = ms[0].dim();
    let mut acc = DMatrix::zeros(p, p);
    for m in ms {
        acc += m.as_matrix();
    }
    SymMatrix::new(acc / ms.len() as f64)
}

/// Covariance estimate of one class by one estimator.
fn class_covariance(s: &CovSample, estimator: &str) -> Result<(SymMatrix, Vec<f64>)> {
    let x = &s.primary;
    let sm = covariance_for(x, true);
    let aux: Vec<SymMatrix> = s.aux.iter().map(|d| covariance_for(d, true)).collect();
    let mut opts = CovMtsOptions {
        whiten: None,
        assume_zero_mean: true,
    };
    let targets: Vec<PreparedTarget> = match estimator {
        "sample" => return Ok((sm, Vec::new())),
        "pooled" => {
            let mut all = aux;
            all.push(sm);
            return Ok((average_sym(&all), Vec::new()));
        }
        "sts_joint" => vec![PreparedTarget::Matrix(average_sym(&aux))],
        "mts" => aux.into_iter().map(PreparedTarget::Matrix).collect(),
        "wmts" => {
            opts.whiten = Some(WhitenMode::Full);
            aux.into_iter().map(PreparedTarget::Matrix).collect()
        }
        other => return Err(MtsError::InvalidParameter(format!("unknown estimator {other}"))),
    };
    let r = mts_cov_prepared(x, &sm, &targets, &opts)?;
    Ok((r.estimate, vec_of(&r.lambda)))
}

fn eval_csp(cfg: &SimConfig, s: &CspSample) -> Vec<EstimatorOutput> {
    Scenario::Sim5Csp
        .estimators()
        .iter()
        .map(|&name| (name, csp_accuracy(cfg, s, name)))
        .collect()
}

fn trial_features(data: &DMatrix<f64>, trials: usize, filters: &crate::sim::csp::CspFilters) -> Result<Vec<DVector<f64>>> {
    let len = data.ncols() / trials;
    (0..trials)
        .map(|t| csp_features(&data.columns(t * len, len).into_owned(), filters))
        .collect()
}

fn feature_covariance(feats: &[DVector<f64>]) -> Result<(DVector<f64>, SymMatrix)> {
    let cols: Vec<DVector<f64>> = feats.to_vec();
    let m = DMatrix::from_columns(&cols);
    let ds = Dataset::new(m)?;
    Ok((sample_mean(&ds), crate::stats::sample_covariance(&ds)))
}

fn csp_accuracy(cfg: &SimConfig, s: &CspSample, estimator: &str) -> Result<(f64, Vec<f64>)> {
    let (ca, la) = class_covariance(&s.a, estimator)?;
    let (cb, lb) = class_covariance(&s.b, estimator)?;
    let filters = csp_filters(&ca, &cb, cfg.m_per_class)?;
    let fa = trial_features(s.a.primary.matrix(), cfg.train_trials, &filters)?;
    let fb = trial_features(s.b.primary.matrix(), cfg.train_trials, &filters)?;
    let (ma, sa) = feature_covariance(&fa)?;
    let (mb, sb) = feature_covariance(&fb)?;
    let pooled = SymMatrix::new((sa.as_matrix() + sb.as_matrix()) / 2.0);
    let lda = lda_train(&ma, &mb, &pooled, None)?;
    let mut correct = 0usize;
    for t in &s.test_a {
        correct += lda.predict_a(&csp_features(t, &filters)?) as usize;
    }
    for t in &s.test_b {
        correct += !lda.predict_a(&csp_features(t, &filters)?) as usize;
    }
    let acc = correct as f64 / (s.test_a.len() + s.test_b.len()) as f64;
    Ok((acc, la.into_iter().chain(lb).collect()))
}

struct RecordKey {
    sweep_index: usize,
    sweep_value: f64,
    model: usize,
    rep: usize,
    seed_used: u64,
    metric: Metric,
}

impl RecordKey {
    fn record(&self, estimator: &str, res: Outcome) -> RunRecord {
        let (value, lambda, error) = match res {
            Ok((v, l)) => (v, l, None),
            Err(e) => (f64::NAN, Vec::new(), Some(e)),
        };
        RunRecord {
            sweep_index: self.sweep_index,
            sweep_value: self.sweep_value,
            model: self.model,
            rep: self.rep,
            estimator: estimator.to_string(),
            metric: self.metric,
            value,
            lambda,
            seed_used: self.seed_used,
            error,
        }
    }
}

/// Execution settings that do not affect results.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; 0 uses all available cores.
    pub workers: usize,
}

/// Runs every (sweep point, model, repetition) of `cfg` and returns the
/// records sorted by sweep point, model, repetition and estimator.
pub fn run_monte_carlo(cfg: &SimConfig, opts: &RunOptions) -> Result<Vec<RunRecord>> {
    run_monte_carlo_with_progress(cfg, opts, &|_, _| {})
}

/// As [`run_monte_carlo`], calling `progress(done, total)` after each model.
pub fn run_monte_carlo_with_progress(
    cfg: &SimConfig,
    opts: &RunOptions,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let sc = cfg.scenario()?;
    let seed = cfg
        .seed
        .ok_or_else(|| MtsError::InvalidParameter("simulation seed is not set".into()))?;
    let sweep = cfg.sweep_values()?;
    let tasks: Vec<(usize, usize)> = (0..sweep.len())
        .flat_map(|s| (0..cfg.reps_model).map(move |m| (s, m)))
        .collect();
    let total = tasks.len();
    let done = AtomicUsize::new(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| MtsError::InvalidParameter(format!("cannot start worker pool: {e}")))?;

    let run_task = |&(si, mi): &(usize, usize)| -> Vec<RunRecord> {
        let value = sweep[si];
        let model_seed = stream_seed(seed, si as u64, mi as u64, MODEL_STREAM);
        let mut rng = ChaCha8Rng::seed_from_u64(model_seed);
        let model = draw_model(cfg, sc, value, &mut rng).map_err(|e| e.to_string());
        let mut out = Vec::with_capacity(cfg.reps_noise * sc.estimators().len());
        for rep in 0..cfg.reps_noise {
            let rep_seed = stream_seed(seed, si as u64, mi as u64, rep as u64);
            let results: Vec<(&str, Outcome)> = match &model {
                Ok(m) => evaluate(cfg, m, &mut ChaCha8Rng::seed_from_u64(rep_seed))
                    .into_iter()
                    .map(|(n, r)| (n, r.map_err(|e| e.to_string())))
                    .collect(),
                Err(e) => sc.estimators().iter().map(|&n| (n, Err(e.clone()))).collect(),
            };
            let key = RecordKey {
                sweep_index: si,
                sweep_value: value,
                model: mi,
                rep,
                seed_used: rep_seed,
                metric: sc.metric(),
            };
            out.extend(results.into_iter().map(|(name, res)| key.record(name, res)));
        }
        let d = done.fetch_add(1, Ordering::Relaxed) + 1;
        progress(d, total);
        out
    };

    let mut records: Vec<RunRecord> = pool.install(|| tasks.par_iter().flat_map_iter(run_task).collect());
    let order = sc.estimators();
    records.sort_by_key(|r| r.sort_key(order));
    Ok(records)
}
