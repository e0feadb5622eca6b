//! Least-squares fit of `log(f_k − f*)` against `log k`.

use serde::{Deserialize, Serialize};

/// Gaps at or below this are treated as underflow.
pub const GAP_FLOOR: f64 = 1e-14;
pub const MIN_FIT_POINTS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub window: (usize, usize),
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FitError {
    #[error("window [{lo}, {hi}] has {points} points, need at least {MIN_FIT_POINTS}")]
    TooShort { lo: usize, hi: usize, points: usize },
    #[error("gap {gap:e} at k = {k} is at or below {GAP_FLOOR:e}")]
    Underflow { k: usize, gap: f64 },
    #[error("k_lo must be at least 1")]
    ZeroStart,
}

/// Fits over `gaps[k]` for `k ∈ [k_lo, k_hi]`, with `gaps` indexed by `k`.
pub fn fit_rate(gaps: &[f64], k_lo: usize, k_hi: usize) -> Result<RateFit, FitError> {
    if k_lo == 0 {
        return Err(FitError::ZeroStart);
    }
    let hi = k_hi.min(gaps.len().saturating_sub(1));
    let points = (hi + 1).saturating_sub(k_lo);
    if points < MIN_FIT_POINTS {
        return Err(FitError::TooShort { lo: k_lo, hi: k_hi, points });
    }
    let mut xs = Vec::with_capacity(points);
    let mut ys = Vec::with_capacity(points);
    for (k, &gap) in gaps.iter().enumerate().take(hi + 1).skip(k_lo) {
        if !(gap > GAP_FLOOR) {
            return Err(FitError::Underflow { k, gap });
        }
        xs.push((k as f64).ln());
        ys.push(gap.ln());
    }
    let n = points as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(RateFit { slope, intercept, r2, window: (k_lo, hi) })
}

/// Largest `k ≤ k_hi` such that every gap on `[k_lo, k]` is above the floor.
pub fn usable_end(gaps: &[f64], k_lo: usize, k_hi: usize) -> Option<usize> {
    let mut end = None;
    for (k, &g) in gaps.iter().enumerate().take(k_hi + 1).skip(k_lo) {
        if !(g > GAP_FLOOR) {
            break;
        }
        end = Some(k);
    }
    end
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(f: impl Fn(f64) -> f64, n: usize) -> Vec<f64> {
        (0..=n).map(|k| f(k as f64)).collect()
    }

    #[test]
    fn inverse_k_has_slope_minus_one() {
        let fit = fit_rate(&synth(|k| 1.0 / k, 100), 1, 100).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-9);
        assert!(fit.intercept.abs() < 1e-9);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seven_over_k_squared() {
        let fit = fit_rate(&synth(|k| 7.0 / (k * k), 500), 10, 500).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-9);
        assert!((fit.intercept - 7f64.ln()).abs() < 1e-9);
        assert_eq!(fit.window, (10, 500));
    }

    #[test]
    fn short_windows_and_underflow_are_rejected() {
        let g = synth(|k| 1.0 / k, 100);
        assert!(matches!(fit_rate(&g, 5, 13), Err(FitError::TooShort { points: 9, .. })));
        assert!(matches!(fit_rate(&g, 95, 200), Err(FitError::TooShort { points: 6, .. })));
        assert_eq!(fit_rate(&g, 0, 50), Err(FitError::ZeroStart));
        let g = synth(|k| (-k).exp(), 100);
        assert!(matches!(fit_rate(&g, 1, 100), Err(FitError::Underflow { k: 33, .. })));
        assert_eq!(usable_end(&g, 1, 100), Some(32));
    }
}
