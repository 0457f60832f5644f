//! Chebyshev (first-kind nodes) spectral integration and differentiation on one panel.

use nalgebra::DMatrix;
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct ChebPanel {
    pub a: f64,
    pub b: f64,
    /// Ascending nodes in [a, b].
    pub nodes: Vec<f64>,
    /// Values at nodes to Chebyshev coefficients.
    coeff: DMatrix<f64>,
}

fn cheb_t(k: usize, y: f64) -> f64 {
    (k as f64 * y.clamp(-1.0, 1.0).acos()).cos()
}

impl ChebPanel {
    pub fn new(a: f64, b: f64, n: usize) -> Self {
        assert!(n >= 2 && b > a);
        let ys: Vec<f64> = (0..n).map(|j| -(PI * (j as f64 + 0.5) / n as f64).cos()).collect();
        let nodes = ys.iter().map(|y| a + 0.5 * (b - a) * (y + 1.0)).collect();
        let mut coeff = DMatrix::zeros(n, n);
        for k in 0..n {
            let s = if k == 0 { 1.0 } else { 2.0 } / n as f64;
            for (j, y) in ys.iter().enumerate() {
                coeff[(k, j)] = s * cheb_t(k, *y);
            }
        }
        ChebPanel { a, b, nodes, coeff }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn to_ref(&self, x: f64) -> f64 {
        2.0 * (x - self.a) / (self.b - self.a) - 1.0
    }

    /// Row vector r with r·f = interpolant of f at x.
    pub fn interp_row(&self, x: f64) -> Vec<f64> {
        let y = self.to_ref(x);
        let n = self.len();
        let t: Vec<f64> = (0..n).map(|k| cheb_t(k, y)).collect();
        (0..n).map(|j| (0..n).map(|k| t[k] * self.coeff[(k, j)]).sum()).collect()
    }

    fn antideriv_coeffs(c: &[f64]) -> Vec<f64> {
        let n = c.len();
        let get = |k: usize| if k < n { c[k] } else { 0.0 };
        let mut f = vec![0.0; n + 1];
        f[1] = get(0) - 0.5 * get(2);
        for k in 2..=n {
            f[k] = (get(k - 1) - get(k + 1)) / (2.0 * k as f64);
        }
        f
    }

    /// Matrix L with (L f)_i = ∫_a^{x_i} f.
    pub fn left_integration(&self) -> DMatrix<f64> {
        self.integration_to(true)
    }

    /// Matrix R with (R f)_i = ∫_{x_i}^b f.
    pub fn right_integration(&self) -> DMatrix<f64> {
        self.integration_to(false)
    }

    fn integration_to(&self, left: bool) -> DMatrix<f64> {
        let n = self.len();
        let scale = 0.5 * (self.b - self.a);
        let ys: Vec<f64> = self.nodes.iter().map(|x| self.to_ref(*x)).collect();
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            let c: Vec<f64> = (0..n).map(|k| self.coeff[(k, j)]).collect();
            let f = Self::antideriv_coeffs(&c);
            let at = |y: f64| f.iter().enumerate().map(|(k, fk)| fk * cheb_t(k, y)).sum::<f64>();
            let fa = at(-1.0);
            let fb = at(1.0);
            for (i, y) in ys.iter().enumerate() {
                let fy = at(*y);
                out[(i, j)] = scale * if left { fy - fa } else { fb - fy };
            }
        }
        out
    }

    /// Weights for ∫_a^b f.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.len();
        let scale = 0.5 * (self.b - self.a);
        (0..n)
            .map(|j| {
                let c: Vec<f64> = (0..n).map(|k| self.coeff[(k, j)]).collect();
                let f = Self::antideriv_coeffs(&c);
                let s: f64 = f.iter().enumerate().map(|(k, fk)| fk * (1.0 - if k % 2 == 0 { 1.0 } else { -1.0 })).sum();
                scale * s
            })
            .collect()
    }

    /// Differentiation matrix on the nodes.
    pub fn differentiation(&self) -> DMatrix<f64> {
        let n = self.len();
        let scale = 2.0 / (self.b - self.a);
        let ys: Vec<f64> = self.nodes.iter().map(|x| self.to_ref(*x)).collect();
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            let c: Vec<f64> = (0..n).map(|k| self.coeff[(k, j)]).collect();
            let mut d = vec![0.0; n + 2];
            for k in (0..n.saturating_sub(1)).rev() {
                d[k] = d[k + 2] + 2.0 * (k + 1) as f64 * c[k + 1];
            }
            d[0] *= 0.5;
            for (i, y) in ys.iter().enumerate() {
                out[(i, j)] = scale * (0..n).map(|k| d[k] * cheb_t(k, *y)).sum::<f64>();
            }
        }
        out
    }
}
