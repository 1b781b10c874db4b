//! Log-log regression of remainder sequences against `n`.

use crate::error::{Error, Result};
use serde::Serialize;

/// Least-squares line `ln|value| ≈ intercept + slope · ln n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points_used: usize,
    /// Points dropped because the value was zero or non-finite.
    pub dropped: usize,
}

/// Fits `ln|v|` against `ln n`, dropping zero and non-finite values.
pub fn fit_rate(ns: &[i64], values: &[f64]) -> Result<RateFit> {
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    fit_loglog(&xs, values)
}

/// [`fit_rate`] for real positive abscissae.
pub fn fit_loglog(xs: &[f64], values: &[f64]) -> Result<RateFit> {
    if xs.len() != values.len() {
        return Err(Error::InvalidArgument(format!("fit_rate: {} abscissae for {} values", xs.len(), values.len())));
    }
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(values)
        .filter(|(&x, &v)| x > 0.0 && v != 0.0 && v.is_finite())
        .map(|(&x, &v)| (x.ln(), v.abs().ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::TooFewPoints { usable: pts.len() });
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("fit_rate: all n equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy <= f64::EPSILON * k * my.abs().max(1.0) { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(RateFit { slope, intercept, r2, points_used: pts.len(), dropped: xs.len() - pts.len() })
}

/// Slope check against a target: two-sided (`|slope - target| <= slack`)
/// or one-sided upper bound (`slope <= target + slack`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlopeCheck {
    Within,
    AtMost,
}

impl SlopeCheck {
    pub fn passes(self, slope: f64, target: f64, slack: f64) -> bool {
        match self {
            SlopeCheck::Within => (slope - target).abs() <= slack,
            SlopeCheck::AtMost => slope <= target + slack,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Vec<i64> {
        (7..=13).map(|e| 1_i64 << e).collect()
    }

    #[test]
    fn exact_power() {
        let ns = grid();
        let v: Vec<f64> = ns.iter().map(|&n| (n as f64).powf(-0.5)).collect();
        let f = fit_rate(&ns, &v).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_values() {
        let ns = grid();
        let f = fit_rate(&ns, &vec![3.0; ns.len()]).unwrap();
        assert!(f.slope.abs() < 1e-12);
        assert_eq!(f.r2, 1.0);
    }

    #[test]
    fn log_factor_slack() {
        let ns = grid();
        let v: Vec<f64> = ns.iter().map(|&n| (n as f64).powf(-0.5) * (n as f64).ln()).collect();
        let f = fit_rate(&ns, &v).unwrap();
        // least-squares slope on this grid, from an independent numpy fit
        assert!(f.slope > -0.5 && f.slope < -0.32, "{}", f.slope);
        assert!((f.slope + 0.352_189_79).abs() < 1e-7);
    }

    #[test]
    fn zeros_dropped_and_too_few() {
        let f = fit_rate(&[1, 2, 3, 4], &[1.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!((f.points_used, f.dropped), (3, 1));
        assert!(matches!(fit_rate(&[1, 2, 3], &[1.0, 0.0, 2.0]), Err(Error::TooFewPoints { usable: 2 })));
        assert!(fit_rate(&[1, 2], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn recovers_power_law(alpha in -3.0f64..3.0, c in 0.01f64..100.0) {
            let ns = grid();
            let v: Vec<f64> = ns.iter().map(|&n| c * (n as f64).powf(alpha)).collect();
            let f = fit_rate(&ns, &v).unwrap();
            prop_assert!((f.slope - alpha).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&f.r2));
        }
    }
}
