//! Empirical quantiles with linear interpolation between order statistics.

use crate::error::{Error, Result};

/// Empirical quantile of `sample` at probability `u` in [0, 1].
///
/// Uses the linear-interpolation definition: with the sample sorted as
/// x_(0) <= ... <= x_(m-1), the quantile at u is the value at fractional
/// position h = (m - 1) u, interpolated between the two straddling order
/// statistics. u = 0 and u = 1 return the sample minimum and maximum.
pub fn empirical_quantile(sample: &[f64], u: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::ParameterOutOfRange {
            name: "u",
            value: u,
            range: "[0, 1]",
        });
    }
    for &v in sample {
        if !v.is_finite() {
            return Err(Error::NonFiniteEntry {
                row: 0,
                col: 0,
                value: v,
            });
        }
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(quantile_sorted(&sorted, u))
}

/// Quantile of an already ascending-sorted sample (no validation).
///
/// Callers that need many quantiles from one sample should sort once and use
/// this directly.
pub fn quantile_sorted(sorted: &[f64], u: f64) -> f64 {
    let m = sorted.len();
    let h = (m as f64 - 1.0) * u;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi || hi >= m {
        sorted[lo.min(m - 1)]
    } else {
        let w = h - lo as f64;
        sorted[lo] + w * (sorted[hi] - sorted[lo])
    }
}
