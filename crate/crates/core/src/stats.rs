//! Binomial intervals and weighted least squares.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lo = if k == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if k == n {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

/// Result of a weighted straight-line fit `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    /// Weighted residual sum of squares.
    pub rss: f64,
}

/// Weighted least squares; standard errors scale with the residual variance.
pub fn weighted_linear_fit(xs: &[f64], ys: &[f64], ws: &[f64]) -> Result<LinearFit> {
    let n = xs.len();
    if n != ys.len() || n != ws.len() {
        return Err(Error::Domain("fit inputs have different lengths".into()));
    }
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "{n} points cannot determine a line"
        )));
    }
    if ws.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::Domain(
            "fit weights must be positive and finite".into(),
        ));
    }
    let sw: f64 = ws.iter().sum();
    let mx = xs.iter().zip(ws).map(|(x, w)| w * x).sum::<f64>() / sw;
    let my = ys.iter().zip(ws).map(|(y, w)| w * y).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(ws).map(|(x, w)| w * (x - mx).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .zip(ws)
        .map(|((x, y), w)| w * (x - mx) * (y - my))
        .sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .zip(ws)
        .map(|((x, y), w)| w * (y - intercept - slope * x).powi(2))
        .sum();
    let s2 = if n > 2 { rss / (n - 2) as f64 } else { 0.0 };
    let slope_se = (s2 / sxx).sqrt();
    let intercept_se = (s2 * (1.0 / sw + mx * mx / sxx)).sqrt();
    Ok(LinearFit {
        slope,
        intercept,
        slope_se,
        intercept_se,
        rss,
    })
}

/// Mean and coefficient of variation (population standard deviation over mean).
pub fn mean_cv(v: &[f64]) -> Option<(f64, f64)> {
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt() / mean.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wilson_reference_values() {
        // k = 10, n = 100: standard reference interval (0.0552, 0.1744)
        let (lo, hi) = wilson(10, 100, Z95);
        assert_relative_eq!(lo, 0.055_229, epsilon = 1e-5);
        assert_relative_eq!(hi, 0.174_366, epsilon = 1e-5);
        assert_eq!(wilson(0, 50, Z95).0, 0.0);
        assert_eq!(wilson(50, 50, Z95).1, 1.0);
        let (lo, hi) = wilson(5, 1_000_000, Z95);
        assert!(lo > 0.0 && lo < 5e-6 && hi > 5e-6);
    }

    #[test]
    fn exact_line_is_recovered() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 2.25 * x).collect();
        let ws: Vec<f64> = (0..10).map(|i| 1.0 + i as f64).collect();
        let f = weighted_linear_fit(&xs, &ys, &ws).unwrap();
        assert_relative_eq!(f.slope, -2.25, max_relative = 1e-13);
        assert_relative_eq!(f.intercept, 1.5, max_relative = 1e-13);
        assert!(f.slope_se < 1e-12);
    }

    #[test]
    fn slope_error_matches_textbook_formula() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [1.1, 1.9, 3.2, 3.9, 5.1];
        let f = weighted_linear_fit(&xs, &ys, &[1.0; 5]).unwrap();
        // unweighted: se = sqrt(rss/(n−2)/Sxx) with Sxx = 10
        assert_relative_eq!(
            f.slope_se,
            (f.rss / 3.0 / 10.0).sqrt(),
            max_relative = 1e-14
        );
        assert!(weighted_linear_fit(&[1.0], &[1.0], &[1.0]).is_err());
        assert!(weighted_linear_fit(&[1.0, 1.0], &[1.0, 2.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn cv() {
        assert_eq!(mean_cv(&[5.0, 5.0, 5.0]), Some((5.0, 0.0)));
        let (m, cv) = mean_cv(&[1.0, 3.0]).unwrap();
        assert_eq!((m, cv), (2.0, 0.5));
    }
}
