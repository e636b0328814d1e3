//! Log-linear growth fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordinary least squares `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (zero for fewer than three points).
    pub slope_stderr: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Fit(format!("need >= 2 paired samples, got {} and {}", x.len(), y.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let (dx, dy) = (xi - mx, yi - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(&xi, &yi)| (yi - intercept - slope * xi).powi(2)).sum();
    let slope_stderr = if x.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(LinearFit { slope, intercept, slope_stderr, r_squared })
}

/// Exponential growth `C ~ exp(rate * t)` fitted on a time window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    /// Fitted rate of `ln C`, i.e. twice the effective Lyapunov exponent.
    pub rate: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub samples: usize,
    pub rate_stderr: f64,
    /// The rate is at least five times the inverse window length.
    pub valid: bool,
}

/// Minimum number of samples inside a fit window.
pub const MIN_FIT_SAMPLES: usize = 5;

/// Validity rule for growth fits: `rate >= 5 / (t_b - t_a)`.
pub fn growth_is_valid(rate: f64, window: (f64, f64)) -> bool {
    rate >= 5.0 / (window.1 - window.0)
}

/// Least-squares line through `ln values` against `times` restricted to `window`.
pub fn fit_growth_rate(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<GrowthFit> {
    let (ta, tb) = window;
    if !(tb > ta) {
        return Err(Error::Fit(format!("empty window [{ta}, {tb}]")));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &c) in times.iter().zip(values) {
        if t >= ta && t <= tb {
            if !(c > 0.0) {
                return Err(Error::Fit(format!("non-positive value {c} at t = {t}")));
            }
            xs.push(t);
            ys.push(c.ln());
        }
    }
    fit_log_values(&xs, &ys, window)
}

/// Same as [`fit_growth_rate`] for a series that is already logarithmic.
pub fn fit_log_growth(times: &[f64], log_values: &[f64], window: (f64, f64)) -> Result<GrowthFit> {
    let (ta, tb) = window;
    if !(tb > ta) {
        return Err(Error::Fit(format!("empty window [{ta}, {tb}]")));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        times.iter().zip(log_values).filter(|(&t, _)| t >= ta && t <= tb).map(|(&t, &y)| (t, y)).unzip();
    if let Some(y) = ys.iter().find(|y| !y.is_finite()) {
        return Err(Error::Fit(format!("non-finite log value {y}")));
    }
    fit_log_values(&xs, &ys, window)
}

fn fit_log_values(xs: &[f64], ys: &[f64], window: (f64, f64)) -> Result<GrowthFit> {
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!("{} samples in window, need at least {MIN_FIT_SAMPLES}", xs.len())));
    }
    let lf = linear_fit(xs, ys)?;
    Ok(GrowthFit {
        rate: lf.slope,
        intercept: lf.intercept,
        window,
        samples: xs.len(),
        rate_stderr: lf.slope_stderr,
        valid: growth_is_valid(lf.slope, window),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn exp3_is_exact_but_invalid() {
        let t = grid(0.0, 1.0, 21);
        let c: Vec<f64> = t.iter().map(|t| (3.0 * t).exp()).collect();
        let f = fit_growth_rate(&t, &c, (0.0, 1.0)).unwrap();
        assert!((f.rate - 3.0).abs() < 1e-10);
        assert!(!f.valid);
    }

    #[test]
    fn exp8_is_valid() {
        let t = grid(0.0, 1.0, 21);
        let c: Vec<f64> = t.iter().map(|t| (8.0 * t).exp()).collect();
        let f = fit_growth_rate(&t, &c, (0.0, 1.0)).unwrap();
        assert!((f.rate - 8.0).abs() < 1e-10);
        assert!(f.valid);
    }

    #[test]
    fn nonpositive_rejected() {
        let t = grid(0.0, 1.0, 6);
        let mut c = vec![1.0; 6];
        c[3] = 0.0;
        assert!(fit_growth_rate(&t, &c, (0.0, 1.0)).is_err());
    }

    #[test]
    fn too_few_samples() {
        let t = grid(0.0, 1.0, 4);
        assert!(fit_growth_rate(&t, &[1.0; 4], (0.0, 1.0)).is_err());
    }
}
