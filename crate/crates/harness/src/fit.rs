//! Least-squares power-law fits on log-log axes.

use crate::error::{HarnessError, Result};

/// Points with k below this are never fitted (early transients).
pub const MIN_K: usize = 50;
pub const MIN_POINTS: usize = 20;
/// Non-positive values are clipped here before taking logs.
pub const CLIP: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// inclusive k range actually fitted
    pub window: (usize, usize),
    /// true if any value in the window was clipped
    pub clipped: bool,
}

impl RateFit {
    pub fn meets(&self, slope_at_most: f64, min_r_squared: f64) -> bool {
        self.slope <= slope_at_most && self.r_squared >= min_r_squared
    }
}

/// Fits `log v = intercept + slope·log k` over the last `window_fraction`
/// of the iterations, ignoring k < 50.
pub fn fit_rate(series: &[(usize, f64)], window_fraction: f64) -> Result<RateFit> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(HarnessError::Config(format!(
            "window fraction must lie in (0,1], got {window_fraction}"
        )));
    }
    let k_max = series.iter().map(|p| p.0).max().unwrap_or(0);
    let k_lo = ((k_max as f64) * (1.0 - window_fraction)).ceil() as usize;
    let k_lo = k_lo.max(MIN_K);
    let mut clipped = false;
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(k, v)| *k >= k_lo && v.is_finite())
        .map(|&(k, v)| {
            if v < CLIP {
                clipped = true;
            }
            ((k as f64).ln(), v.max(CLIP).ln())
        })
        .collect();
    if pts.len() < MIN_POINTS {
        return Err(HarnessError::InsufficientData {
            needed: MIN_POINTS,
            found: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // a perfectly flat series is explained exactly by its mean
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    let lo = series.iter().map(|p| p.0).filter(|&k| k >= k_lo).min().unwrap_or(k_lo);
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        window: (lo, k_max),
        clipped,
    })
}
