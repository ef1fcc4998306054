//! Evaluation metrics and small summary statistics.

use crate::error::{MtsError, Result};

/// Percentage improvement in average squared loss over the sample estimator.
///
/// 100 means no error, 0 means no improvement, negative means worse.
pub fn prial(sq_err_sample: &[f64], sq_err_shrunk: &[f64]) -> Result<f64> {
    if sq_err_sample.is_empty() || sq_err_sample.len() != sq_err_shrunk.len() {
        return Err(MtsError::DimensionMismatch {
            context: "paired PRIAL errors".into(),
            expected: sq_err_sample.len(),
            actual: sq_err_shrunk.len(),
        });
    }
    let base = mean(sq_err_sample);
    if base == 0.0 {
        return Err(MtsError::InvalidParameter(
            "sample estimator has zero mean error; PRIAL undefined".into(),
        ));
    }
    Ok(100.0 * (base - mean(sq_err_shrunk)) / base)
}

/// Accuracy of the shrunk estimator minus accuracy of the sample estimator.
pub fn accuracy_gain(acc_shrunk: f64, acc_sample: f64) -> f64 {
    acc_shrunk - acc_sample
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Standard error of the mean (sample standard deviation / √n); 0 for n < 2.
pub fn standard_error(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(x);
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prial_examples() {
        assert_eq!(prial(&[1.0, 3.0], &[0.0, 0.0]).unwrap(), 100.0);
        assert_eq!(prial(&[1.0, 3.0], &[1.0, 3.0]).unwrap(), 0.0);
        assert_eq!(prial(&[1.0, 3.0], &[2.0, 4.0]).unwrap(), -50.0);
        assert!(prial(&[0.0], &[0.0]).is_err());
        assert!(prial(&[1.0], &[1.0, 2.0]).is_err());
        assert!(prial(&[], &[]).is_err());
    }

    #[test]
    fn gain_examples() {
        assert_eq!(accuracy_gain(0.8, 0.8), 0.0);
        assert!((accuracy_gain(0.9, 0.8) - 0.1).abs() < 1e-15);
        assert!((accuracy_gain(0.7, 0.8) + 0.1).abs() < 1e-15);
    }

    #[test]
    fn standard_error_simple() {
        assert_eq!(standard_error(&[1.0]), 0.0);
        let se = standard_error(&[1.0, 2.0, 3.0, 4.0]);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }
}
