//! Utility and overhead metrics.
//!
//! RMSPE between paired non-private (NP) and private (DP) results:
//!
//! ```text
//! RMSPE = sqrt( (1/N) · Σ ((NP − DP) / NP)² ) · 100 %
//! ```
//!
//! Runtime overhead reuses RMSPE with durations in place of results. Memory
//! overhead compares worst-case peaks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    pub np_value: f64,
    pub dp_value: f64,
}

impl PairedSample {
    pub fn new(np_value: f64, dp_value: f64) -> Self {
        PairedSample { np_value, dp_value }
    }

    pub fn relative_error(&self) -> f64 {
        (self.np_value - self.dp_value) / self.np_value
    }
}

/// Root mean square percentage error, in percent.
pub fn rmspe(pairs: &[PairedSample]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("RMSPE needs at least one pair"));
    }
    if let Some(index) = pairs.iter().position(|p| p.np_value == 0.0) {
        return Err(Error::ZeroBaseline { index });
    }
    let mean_sq = pairs
        .iter()
        .map(|p| p.relative_error().powi(2))
        .sum::<f64>()
        / pairs.len() as f64;
    Ok(mean_sq.sqrt() * 100.0)
}

/// Drops pairs whose NP value is zero, returning the survivors and the
/// number dropped.
pub fn drop_zero_baselines(pairs: &[PairedSample]) -> (Vec<PairedSample>, usize) {
    let kept: Vec<PairedSample> = pairs.iter().copied().filter(|p| p.np_value != 0.0).collect();
    let dropped = pairs.len() - kept.len();
    (kept, dropped)
}

/// Removes the `k_low` items with the smallest key and the `k_high` with
/// the largest. Ties resolve by position; survivors keep their order.
pub fn trim_by_key<T: Clone>(
    items: &[T],
    k_low: usize,
    k_high: usize,
    key: impl Fn(&T) -> f64,
) -> Result<Vec<T>> {
    if items.len() <= k_low + k_high {
        return Err(Error::invalid(format!(
            "cannot trim {k_low} + {k_high} extremes from {} values",
            items.len()
        )));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| key(&items[a]).total_cmp(&key(&items[b])).then(a.cmp(&b)));
    let mut keep = vec![true; items.len()];
    for &i in order.iter().take(k_low) {
        keep[i] = false;
    }
    for &i in order.iter().rev().take(k_high) {
        keep[i] = false;
    }
    Ok(items
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(it, _)| it.clone())
        .collect())
}

/// Trims signed `DP − NP` errors by magnitude: the `k_low` smallest and
/// `k_high` largest `|e|` are removed.
pub fn trim_extremes(values: &[f64], k_low: usize, k_high: usize) -> Result<Vec<f64>> {
    trim_by_key(values, k_low, k_high, |v| v.abs())
}

/// `(dp_peak − np_peak) / np_peak · 100`. Negative when DP uses less.
pub fn overhead_percent(dp_peak: f64, np_peak: f64) -> Result<f64> {
    if !(np_peak > 0.0) {
        return Err(Error::invalid(format!("NP peak must be positive, got {np_peak}")));
    }
    if !(dp_peak >= 0.0) {
        return Err(Error::invalid(format!("DP peak must be nonnegative, got {dp_peak}")));
    }
    Ok((dp_peak - np_peak) / np_peak * 100.0)
}
