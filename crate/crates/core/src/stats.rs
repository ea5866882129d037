//! Rank correlation and box-plot summaries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least two observations, got {0}")]
    TooShort(usize),
    #[error("sequence is constant")]
    Constant,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("empty input")]
    Empty,
}

/// Average ranks (1-based); tied values share the mean of their rank range.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooShort(x.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::Constant);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Quantile of sorted data with linear interpolation between order
/// statistics (position `(len - 1) * q`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSummary {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

/// Median and quartiles, whiskers at the most extreme points within
/// 1.5 IQR of the box, everything beyond listed as outliers.
pub fn box_summary(values: &[f64]) -> Result<BoxSummary, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&v, 0.25);
    let median = quantile_sorted(&v, 0.5);
    let q3 = quantile_sorted(&v, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v.iter().copied().filter(|x| (lo_fence..=hi_fence).contains(x)).collect();
    let outliers = v.iter().copied().filter(|x| !(lo_fence..=hi_fence).contains(x)).collect();
    Ok(BoxSummary {
        median,
        q1,
        q3,
        // interpolated quartiles can sit outside the data left inside the fences
        whisker_low: inside.first().map_or(q1, |&w| w.min(q1)),
        whisker_high: inside.last().map_or(q3, |&w| w.max(q3)),
        outliers,
    })
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(values: impl IntoIterator<Item = f64>) -> Option<(f64, f64, usize)> {
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for x in values {
        n += 1;
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
    }
    match n {
        0 => None,
        1 => Some((mean, 0.0, 1)),
        _ => Some((mean, (m2 / (n - 1) as f64 / n as f64).sqrt(), n)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_reversed() {
        let x = [3.0, 1.0, 4.0, 1.5, 9.0];
        assert!((spearman(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((spearman(&x, &y).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), Err(StatsError::Constant));
        assert_eq!(spearman(&[1.0], &[1.0]), Err(StatsError::TooShort(1)));
        assert_eq!(spearman(&[1.0, 2.0], &[1.0]), Err(StatsError::LengthMismatch(2, 1)));
        assert_eq!(spearman(&[1.0, f64::NAN], &[1.0, 2.0]), Err(StatsError::NonFinite));
    }

    #[test]
    fn box_single_value() {
        let b = box_summary(&[0.4]).unwrap();
        assert_eq!((b.median, b.q1, b.q3, b.whisker_low, b.whisker_high), (0.4, 0.4, 0.4, 0.4, 0.4));
        assert!(b.outliers.is_empty());
    }

    #[test]
    fn box_one_to_nine() {
        let v: Vec<f64> = (1..=9).map(f64::from).collect();
        let b = box_summary(&v).unwrap();
        assert_eq!((b.median, b.q1, b.q3), (5.0, 3.0, 7.0));
        assert_eq!((b.whisker_low, b.whisker_high), (1.0, 9.0));
    }

    #[test]
    fn box_flags_outlier() {
        let b = box_summary(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!(b.outliers, vec![100.0]);
        assert_eq!(b.whisker_high, 4.0);
    }

    #[test]
    fn stderr() {
        let (m, se, n) = mean_and_stderr([1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(n, 4);
        assert!((m - 2.5).abs() < 1e-15);
        // sample variance 5/3
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }
}
