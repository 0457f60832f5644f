//! Fixed-step classical Runge–Kutta for two-component first-order systems.

use std::ops::{Add, Mul};

/// Integrates y' = f(x, y) from x0 to x1 in `steps` equal steps.
pub fn rk4<T, F>(f: F, x0: f64, x1: f64, y0: [T; 2], steps: usize) -> [T; 2]
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
    F: Fn(f64, [T; 2]) -> [T; 2],
{
    let h = (x1 - x0) / steps as f64;
    let mut y = y0;
    let comb = |y: [T; 2], k: [T; 2], s: f64| [y[0] + k[0] * s, y[1] + k[1] * s];
    for i in 0..steps {
        let x = x0 + i as f64 * h;
        let k1 = f(x, y);
        let k2 = f(x + 0.5 * h, comb(y, k1, 0.5 * h));
        let k3 = f(x + 0.5 * h, comb(y, k2, 0.5 * h));
        let k4 = f(x + h, comb(y, k3, h));
        for c in 0..2 {
            y[c] = y[c] + (k1[c] + k2[c] * 2.0 + k3[c] * 2.0 + k4[c]) * (h / 6.0);
        }
    }
    y
}
