//! Least-squares line fits and tail-growth verdicts.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual.
    pub max_residual: f64,
    pub rms_residual: f64,
}

/// Ordinary least squares y ≈ slope·x + intercept.
pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    assert!(x.len() >= 2, "need two points for a line fit");
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let mut max_residual: f64 = 0.0;
    let mut ss = 0.0;
    for (a, b) in x.iter().zip(y) {
        let r = b - (slope * a + intercept);
        max_residual = max_residual.max(r.abs());
        ss += r * r;
    }
    LineFit { slope, intercept, max_residual, rms_residual: (ss / n).sqrt() }
}

/// Tail behaviour of a positive sampled function on an increasing grid.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct TailFit {
    /// Slope of ln y against ln x over the tail window.
    pub loglog_slope: f64,
    /// Increase of the fitted ln y across the tail window.
    pub log_rise: f64,
    pub bounded: bool,
}

/// Allowed rise of ln y across the tail window before a sample is called unbounded.
pub const TAIL_RISE_TOL: f64 = 0.05;

/// Fits ln y against ln x on the last quarter of the log-range of x (x > 0 only).
/// Zero samples count as bounded; non-finite samples make the verdict unbounded.
pub fn tail_growth(x: &[f64], ln_y: &[f64]) -> TailFit {
    if ln_y.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return TailFit { loglog_slope: f64::INFINITY, log_rise: f64::INFINITY, bounded: false };
    }
    let pts: Vec<(f64, f64)> = x.iter().zip(ln_y).filter(|(a, _)| **a > 0.0).map(|(a, b)| (a.ln(), *b)).collect();
    if pts.len() < 4 {
        return TailFit { loglog_slope: 0.0, log_rise: 0.0, bounded: true };
    }
    let lo = pts.first().unwrap().0;
    let hi = pts.last().unwrap().0;
    let cut = hi - 0.25 * (hi - lo);
    let tail: Vec<(f64, f64)> = pts.iter().copied().filter(|(a, b)| *a >= cut && b.is_finite()).collect();
    if tail.len() < 2 {
        return TailFit { loglog_slope: f64::NEG_INFINITY, log_rise: f64::NEG_INFINITY, bounded: true };
    }
    let xs: Vec<f64> = tail.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = tail.iter().map(|p| p.1).collect();
    let f = fit_line(&xs, &ys);
    let rise = f.slope * (xs[xs.len() - 1] - xs[0]);
    TailFit { loglog_slope: f.slope, log_rise: rise, bounded: rise <= TAIL_RISE_TOL }
}

/// Geometric grid of `n` points on [a, b], a > 0.
pub fn geometric_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Uniform grid of `n` points on [a, b].
pub fn linear_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}
