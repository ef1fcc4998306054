//! Summaries of run records: per (sweep point, estimator) means, standard
//! errors, PRIAL and accuracy gain.
//!
//! Standard errors are clustered by model: repetitions sharing a model are
//! averaged first, and the SE is taken over the model-level averages.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::Result;
use crate::sim::metrics::{mean, standard_error};
use crate::sim::runner::{Metric, RunRecord, SimConfig};

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryEntry {
    pub sweep_index: usize,
    pub sweep_value: f64,
    pub estimator: String,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean: f64,
    pub se: f64,
    /// Squared-error scenarios only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prial: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prial_se: Option<f64>,
    /// Accuracy scenarios only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy_gain: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy_gain_se: Option<f64>,
    pub lambda_mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub scenario: String,
    pub sweep_parameter: String,
    pub metric: Metric,
    pub seed: Option<u64>,
    pub reps_model: usize,
    pub reps_noise: usize,
    pub entries: Vec<SummaryEntry>,
}

impl Summary {
    pub fn entry(&self, sweep_index: usize, estimator: &str) -> Option<&SummaryEntry> {
        self.entries
            .iter()
            .find(|e| e.sweep_index == sweep_index && e.estimator == estimator)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Mean difference and its model-clustered standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contrast {
    pub estimate: f64,
    pub se: f64,
    pub models: usize,
}

type Key = (usize, usize); // (model, rep)

fn values(records: &[RunRecord], sweep_index: usize, estimator: &str) -> BTreeMap<Key, f64> {
    records
        .iter()
        .filter(|r| r.sweep_index == sweep_index && r.estimator == estimator && r.ok())
        .map(|r| ((r.model, r.rep), r.value))
        .collect()
}

/// Per-model averages of f over repetitions present in every map.
fn paired_model_means(maps: &[&BTreeMap<Key, f64>], f: impl Fn(&[f64]) -> f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut by_model: BTreeMap<usize, (Vec<f64>, Vec<Vec<f64>>)> = BTreeMap::new();
    for (key, &v0) in maps[0] {
        let mut vals = vec![v0];
        for m in &maps[1..] {
            match m.get(key) {
                Some(&v) => vals.push(v),
                None => break,
            }
        }
        if vals.len() == maps.len() {
            let e = by_model.entry(key.0).or_default();
            e.0.push(f(&vals));
            e.1.push(vals);
        }
    }
    let model_means = by_model.values().map(|(d, _)| mean(d)).collect();
    let raw = by_model.into_values().flat_map(|(_, r)| r).collect();
    (model_means, raw)
}

/// Mean of value(a) − value(b) over paired repetitions.
pub fn paired_contrast(records: &[RunRecord], sweep_index: usize, a: &str, b: &str) -> Option<Contrast> {
    let va = values(records, sweep_index, a);
    let vb = values(records, sweep_index, b);
    let (models, raw) = paired_model_means(&[&va, &vb], |v| v[0] - v[1]);
    if raw.is_empty() {
        return None;
    }
    let diffs: Vec<f64> = raw.iter().map(|v| v[0] - v[1]).collect();
    Some(Contrast {
        estimate: mean(&diffs),
        se: standard_error(&models),
        models: models.len(),
    })
}

/// PRIAL of `estimator` relative to "sample" with its model-clustered SE.
pub fn prial_with_se(records: &[RunRecord], sweep_index: usize, estimator: &str) -> Option<Contrast> {
    prial_difference(records, sweep_index, estimator, "sample")
}

/// PRIAL(a) − PRIAL(b), both relative to "sample", with the SE of the paired
/// difference (the sample error is treated as a fixed denominator).
pub fn prial_difference(records: &[RunRecord], sweep_index: usize, a: &str, b: &str) -> Option<Contrast> {
    let vs = values(records, sweep_index, "sample");
    let va = values(records, sweep_index, a);
    let vb = values(records, sweep_index, b);
    let (models, raw) = paired_model_means(&[&vs, &va, &vb], |v| v[2] - v[1]);
    if raw.is_empty() {
        return None;
    }
    let base = mean(&raw.iter().map(|v| v[0]).collect::<Vec<_>>());
    if base == 0.0 {
        return None;
    }
    let diffs: Vec<f64> = raw.iter().map(|v| v[2] - v[1]).collect();
    Some(Contrast {
        estimate: 100.0 * mean(&diffs) / base,
        se: 100.0 * standard_error(&models) / base,
        models: models.len(),
    })
}

/// Mean λ vector of an estimator at a sweep point.
pub fn lambda_mean(records: &[RunRecord], sweep_index: usize, estimator: &str) -> Vec<f64> {
    let mut acc: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for r in records
        .iter()
        .filter(|r| r.sweep_index == sweep_index && r.estimator == estimator && r.ok())
    {
        if acc.is_empty() {
            acc = vec![0.0; r.lambda.len()];
        }
        if r.lambda.len() != acc.len() {
            continue;
        }
        for (a, l) in acc.iter_mut().zip(&r.lambda) {
            *a += l;
        }
        count += 1;
    }
    acc.iter().map(|a| a / count.max(1) as f64).collect()
}

/// Model-clustered standard error of the per-model mean λ_k.
pub fn lambda_se(records: &[RunRecord], sweep_index: usize, estimator: &str, k: usize) -> f64 {
    let mut by_model: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records
        .iter()
        .filter(|r| r.sweep_index == sweep_index && r.estimator == estimator && r.ok())
    {
        if let Some(&l) = r.lambda.get(k) {
            by_model.entry(r.model).or_default().push(l);
        }
    }
    let means: Vec<f64> = by_model.values().map(|v| mean(v)).collect();
    standard_error(&means)
}

pub fn summarize(cfg: &SimConfig, records: &[RunRecord]) -> Result<Summary> {
    let sc = cfg.scenario()?;
    let sweep = cfg.sweep_values()?;
    let metric = sc.metric();
    let mut entries = Vec::new();
    for (si, &sv) in sweep.iter().enumerate() {
        for &est in sc.estimators() {
            let all: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.sweep_index == si && r.estimator == est)
                .collect();
            let n_ok = all.iter().filter(|r| r.ok()).count();
            let vals = values(records, si, est);
            let (model_means, raw) = paired_model_means(&[&vals], |v| v[0]);
            let flat: Vec<f64> = raw.iter().map(|v| v[0]).collect();
            let (m, se) = if flat.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                (mean(&flat), standard_error(&model_means))
            };
            let mut entry = SummaryEntry {
                sweep_index: si,
                sweep_value: sv,
                estimator: est.to_string(),
                n_ok,
                n_failed: all.len() - n_ok,
                mean: m,
                se,
                prial: None,
                prial_se: None,
                accuracy_gain: None,
                accuracy_gain_se: None,
                lambda_mean: lambda_mean(records, si, est),
            };
            match metric {
                Metric::SquaredError => {
                    if let Some(c) = prial_with_se(records, si, est) {
                        entry.prial = Some(c.estimate);
                        entry.prial_se = Some(c.se);
                    }
                }
                Metric::Accuracy => {
                    if let Some(c) = paired_contrast(records, si, est, "sample") {
                        entry.accuracy_gain = Some(c.estimate);
                        entry.accuracy_gain_se = Some(c.se);
                    }
                }
            }
            entries.push(entry);
        }
    }
    Ok(Summary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        scenario: sc.name().to_string(),
        sweep_parameter: sc.sweep_parameter().to_string(),
        metric,
        seed: cfg.seed,
        reps_model: cfg.reps_model,
        reps_noise: cfg.reps_noise,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::metrics::prial;
    use crate::sim::runner::{run_monte_carlo, RunOptions, Scenario};

    fn rec(model: usize, rep: usize, est: &str, value: f64) -> RunRecord {
        RunRecord {
            sweep_index: 0,
            sweep_value: 1.0,
            model,
            rep,
            estimator: est.into(),
            metric: Metric::SquaredError,
            value,
            lambda: vec![value / 10.0],
            seed_used: 0,
            error: None,
        }
    }

    #[test]
    fn prial_matches_metric() {
        let mut rs = Vec::new();
        for m in 0..3 {
            for r in 0..2 {
                let s = 1.0 + m as f64 + r as f64;
                rs.push(rec(m, r, "sample", s));
                rs.push(rec(m, r, "mts", s * 0.5 + 0.1 * r as f64));
            }
        }
        let s: Vec<f64> = rs.iter().filter(|r| r.estimator == "sample").map(|r| r.value).collect();
        let t: Vec<f64> = rs.iter().filter(|r| r.estimator == "mts").map(|r| r.value).collect();
        let got = prial_with_se(&rs, 0, "mts").unwrap();
        assert!((got.estimate - prial(&s, &t).unwrap()).abs() < 1e-12);
        assert_eq!(got.models, 3);
        assert!(got.se > 0.0);
        let same = prial_with_se(&rs, 0, "sample").unwrap();
        assert_eq!(same.estimate, 0.0);
        assert_eq!(same.se, 0.0);
    }

    #[test]
    fn failed_records_are_excluded_from_pairs() {
        let mut rs = vec![rec(0, 0, "sample", 2.0), rec(0, 0, "mts", 1.0), rec(0, 1, "sample", 4.0)];
        let mut failed = rec(0, 1, "mts", f64::NAN);
        failed.error = Some("x".into());
        rs.push(failed);
        let c = prial_with_se(&rs, 0, "mts").unwrap();
        assert_eq!(c.estimate, 50.0);
        let d = paired_contrast(&rs, 0, "mts", "sample").unwrap();
        assert_eq!(d.estimate, -1.0);
        assert_eq!(lambda_mean(&rs, 0, "mts"), vec![0.1]);
    }

    #[test]
    fn summary_has_entry_per_point_and_estimator() {
        let cfg = SimConfig {
            sweep: vec![5.0, 7.0],
            reps_model: 3,
            reps_noise: 2,
            seed: Some(5),
            ..SimConfig::new(Scenario::Sim1MeanFoldl)
        };
        let recs = run_monte_carlo(&cfg, &RunOptions { workers: 1 }).unwrap();
        let s = summarize(&cfg, &recs).unwrap();
        assert_eq!(s.entries.len(), 2 * Scenario::Sim1MeanFoldl.estimators().len());
        let e = s.entry(1, "mts").unwrap();
        assert_eq!(e.n_ok, 6);
        assert_eq!(e.lambda_mean.len(), 4);
        assert_eq!(s.entry(0, "sample").unwrap().prial, Some(0.0));
        let json: serde_json::Value = serde_json::from_str(&s.to_json().unwrap()).unwrap();
        assert_eq!(json["schema_version"], 1);
        assert_eq!(json["sweep_parameter"], "p");
        assert_eq!(json["entries"].as_array().unwrap().len(), 14);
    }
}
