use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population standard deviation (divisor `n`), two-pass.
pub fn population_std(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Subtracts the mean. An empty input is returned unchanged.
pub fn mean_subtract(x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let m = mean(x);
    x.iter().map(|v| v - m).collect()
}

/// Standardizes to zero mean and unit population standard deviation.
pub fn zscore(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::InvalidInput("zscore needs at least two samples".into()));
    }
    let centered = mean_subtract(x);
    let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let sd = (centered.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
    if !sd.is_finite() || sd <= 1e-12 * scale || sd == 0.0 {
        return Err(Error::InvalidInput("zero standard deviation".into()));
    }
    Ok(centered.into_iter().map(|v| v / sd).collect())
}
