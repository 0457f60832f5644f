//! Continuation of the mode-0 resolvent across the continuum and resonance search.
//!
//! Everything is parametrized by the momentum z with λ = threshold + z², so the
//! physical sheet is Im z > 0 and the second sheet is Im z ≤ 0.

use crate::decay::DecayProfile;
use crate::error::{param, LabError, Result};
use crate::geometry::InjectivityModel;
use crate::numerics::cheb::ChebPanel;
use crate::numerics::fit::{geometric_grid, tail_growth, TailFit};
use crate::numerics::quad::gauss_legendre_on;
use crate::operators::{BaseCoefficients, Coefficients, Perturbation};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Sheet {
    Physical,
    Second,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SheetCoordinate {
    pub z: Complex64,
    pub threshold: f64,
}

impl SheetCoordinate {
    pub fn new(z: Complex64, threshold: f64) -> Self {
        SheetCoordinate { z, threshold }
    }

    /// Physical-sheet point above a real or complex spectral parameter.
    pub fn from_lambda(lambda: Complex64, threshold: f64) -> Self {
        let mut z = (lambda - threshold).sqrt();
        if z.im < 0.0 || (z.im == 0.0 && z.re < 0.0) {
            z = -z;
        }
        SheetCoordinate { z, threshold }
    }

    pub fn lambda(&self) -> Complex64 {
        self.z * self.z + self.threshold
    }

    pub fn sheet(&self) -> Sheet {
        if self.z.im > 0.0 {
            Sheet::Physical
        } else {
            Sheet::Second
        }
    }

    /// ν = −iz, the exponent of the u-coordinate solutions u^{n/2 ± ν}.
    pub fn nu(&self) -> Complex64 {
        -I * self.z
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelVariant {
    /// (uu′)^{n/2}/ν · (u_</u_>)^ν without the boundary correction.
    Literal,
    /// f₁(u_<)f₂(u_>)/(2ν), vanishing at u = 1.
    Dirichlet,
}

/// Free cusp Green function in the u variable with respect to u^{−(n+1)}du.
pub fn model_kernel(n: usize, u: f64, u2: f64, z: Complex64, variant: KernelVariant) -> Result<Complex64> {
    if !(u >= 1.0 && u2 >= 1.0) {
        return Err(param("u", "kernel lives on u, u′ ≥ 1"));
    }
    let nu = -I * z;
    let (lo, hi) = (u.min(u2), u.max(u2));
    let half = n as f64 / 2.0;
    let pw = |x: f64, e: Complex64| (e * x.ln()).exp();
    Ok(match variant {
        KernelVariant::Literal => (u * u2).powf(half) / nu * pw(lo / hi, nu),
        KernelVariant::Dirichlet => {
            // (u^ν − u^{−ν})/(2ν) = sinh(ν ln u)/ν, removable at ν = 0
            let s = lo.ln();
            let w = nu * s;
            let sinh_over = if w.norm() < 1e-6 { s * (1.0 + w * w / 6.0) } else { w.sinh() / nu };
            lo.powf(half) * sinh_over * hi.powf(half) * pw(hi, -nu)
        }
    })
}

/// sin(w)/w, with the series near 0.
fn sinc(w: Complex64) -> Complex64 {
    if w.norm() < 1e-4 {
        1.0 - w * w / 6.0
    } else {
        w.sin() / w
    }
}

/// Continued log-coordinate kernel sin(z x_<) e^{iz x_>}/z.
pub fn free_kernel(z: Complex64, x: f64, y: f64) -> Complex64 {
    let (lo, hi) = (x.min(y), x.max(y));
    lo * sinc(z * lo) * (I * z * hi).exp()
}

/// R₀(z)f at `xs` for f supported on `support` with interior breakpoints `breaks`.
pub fn continued_free_resolvent(z: Complex64, f: &(dyn Fn(f64) -> f64 + Sync), support: (f64, f64), breaks: &[f64], xs: &[f64]) -> Result<Vec<Complex64>> {
    let (a, b) = support;
    if !(a >= 0.0 && b > a) {
        return Err(param("support", "need 0 ≤ a < b"));
    }
    Ok(xs
        .par_iter()
        .map(|&x| {
            let mut cuts = vec![a, b];
            cuts.extend(breaks.iter().copied().filter(|c| *c > a && *c < b));
            if x > a && x < b {
                cuts.push(x);
            }
            cuts.sort_by(f64::total_cmp);
            let mut acc = Complex64::new(0.0, 0.0);
            for w in cuts.windows(2) {
                let panels = ((w[1] - w[0]) / 0.25).ceil().max(1.0) as usize;
                let h = (w[1] - w[0]) / panels as f64;
                for p in 0..panels {
                    let (ys, ws) = gauss_legendre_on(20, w[0] + p as f64 * h, w[0] + (p + 1) as f64 * h);
                    for (y, wt) in ys.iter().zip(&ws) {
                        acc += free_kernel(z, x, *y) * (f(*y) * wt);
                    }
                }
            }
            acc
        })
        .collect())
}

/// Threshold of the log-coordinate model and the distance origin.
fn model_threshold(coef: &Coefficients) -> Result<f64> {
    match coef.base {
        BaseCoefficients::LogX { n, lambda: 0.0 } => Ok((n * n) as f64 / 4.0),
        BaseCoefficients::Cylinder { mu } => Ok(mu),
        _ => Err(LabError::Input("continuation needs a mode-0 log-coordinate or cylinder model".into())),
    }
}

/// Chebyshev panel discretization of the perturbation's support.
#[derive(Clone, Debug)]
pub struct SupportDiscretization {
    pub panels: Vec<ChebPanel>,
    /// Distances from the Dirichlet end at all nodes.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    left: DMatrix<f64>,
    right: DMatrix<f64>,
    diff: DMatrix<f64>,
    xi: [Vec<f64>; 3],
    pub threshold: f64,
}

fn perturbation_reach(coef: &Coefficients) -> Result<(Vec<f64>, f64)> {
    match &coef.perturbation {
        None => Ok((vec![], 1.0)),
        Some(Perturbation::SquareWell { width, .. }) => Ok((vec![*width], *width)),
        Some(Perturbation::Envelope { beta, eps_p, eps_w, eps_q }) => {
            let amp = eps_p.abs().max(eps_w.abs()).max(eps_q.abs());
            let mut d = 1.0;
            while amp * beta.value(1.0 + d) >= 1e-14 {
                d *= 1.25;
                if d > 1e3 {
                    return Err(LabError::Refused("perturbation does not decay below 1e-14 within distance 1e3".into()));
                }
            }
            Ok((vec![], d))
        }
    }
}

impl SupportDiscretization {
    /// Panels of length ≤ `panel_len` with `order` nodes each, split at coefficient jumps.
    pub fn new(coef: &Coefficients, panel_len: f64, order: usize) -> Result<Self> {
        let threshold = model_threshold(coef)?;
        if !(panel_len > 0.0) || order < 4 {
            return Err(param("panel", "need panel_len > 0 and order ≥ 4"));
        }
        let (breaks, reach) = perturbation_reach(coef)?;
        let mut cuts = vec![0.0];
        cuts.extend(breaks);
        cuts.push(reach);
        cuts.dedup();
        let mut panels = Vec::new();
        for w in cuts.windows(2) {
            let k = ((w[1] - w[0]) / panel_len).ceil().max(1.0) as usize;
            let h = (w[1] - w[0]) / k as f64;
            for p in 0..k {
                panels.push(ChebPanel::new(w[0] + p as f64 * h, w[0] + (p + 1) as f64 * h, order));
            }
        }
        let n = panels.len() * order;
        let mut left = DMatrix::zeros(n, n);
        let mut right = DMatrix::zeros(n, n);
        let mut diff = DMatrix::zeros(n, n);
        let mut weights = Vec::with_capacity(n);
        let mut nodes = Vec::with_capacity(n);
        let pw: Vec<Vec<f64>> = panels.iter().map(|p| p.weights()).collect();
        for (p, panel) in panels.iter().enumerate() {
            let o = p * order;
            let (l, r, d) = (panel.left_integration(), panel.right_integration(), panel.differentiation());
            let w = pw[p].clone();
            for i in 0..order {
                for j in 0..order {
                    left[(o + i, o + j)] = l[(i, j)];
                    right[(o + i, o + j)] = r[(i, j)];
                    diff[(o + i, o + j)] = d[(i, j)];
                }
                // whole earlier panels feed the left integral, later ones the right
                for q in 0..panels.len() {
                    let oq = q * order;
                    if q < p {
                        for j in 0..order {
                            left[(o + i, oq + j)] = pw[q][j];
                        }
                    } else if q > p {
                        for j in 0..order {
                            right[(o + i, oq + j)] = pw[q][j];
                        }
                    }
                }
            }
            weights.extend(w);
            nodes.extend(panel.nodes.iter().copied());
        }
        let free = Coefficients { perturbation: None, ..coef.clone() };
        let x0 = coef.x_min;
        let mut xi = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for (k, d) in nodes.iter().enumerate() {
            let x = x0 + d;
            // Δ_h − Δ_g = −(ξ₀ + ξ₁∂ + ξ₂∂²)
            xi[0][k] = free.q(x) - coef.q(x);
            xi[1][k] = coef.dp(x) / coef.w(x) - free.dp(x) / free.w(x);
            xi[2][k] = coef.p(x) / coef.w(x) - free.p(x) / free.w(x);
        }
        Ok(SupportDiscretization { panels, nodes, weights, left, right, diff, xi, threshold })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Whether all ξ vanish identically.
    pub fn is_trivial(&self) -> bool {
        self.xi.iter().all(|v| v.iter().all(|x| *x == 0.0))
    }

    /// The perturbation Δ_h − Δ_g as a matrix on the nodes.
    fn perturbation_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let d2 = &self.diff * &self.diff;
        DMatrix::from_fn(n, n, |i, j| {
            let id = if i == j { self.xi[0][i] } else { 0.0 };
            -(id + self.xi[1][i] * self.diff[(i, j)] + self.xi[2][i] * d2[(i, j)])
        })
    }
}

/// K(z) = R₀(z)(Δ_h − Δ_g) on the support nodes.
///
/// Accurate while |Im z|·panel_len is a few units; beyond that the panels under-resolve the kernel.
pub fn birman_schwinger(disc: &SupportDiscretization, z: Complex64) -> DMatrix<Complex64> {
    let n = disc.len();
    let x = &disc.nodes;
    let e: Vec<Complex64> = x.iter().map(|x| (I * z * x).exp()).collect();
    let s: Vec<Complex64> = x.iter().map(|x| x * sinc(z * x)).collect();
    let v = disc.perturbation_matrix().map(|a| Complex64::new(a, 0.0));
    let l = disc.left.map(|a| Complex64::new(a, 0.0));
    let r = disc.right.map(|a| Complex64::new(a, 0.0));
    // e^{izx}∫₀^x sin(zy)/z · + sin(zx)/z ∫_x e^{izy} ·
    let a = DMatrix::from_fn(n, n, |i, j| e[i] * l[(i, j)] * s[j] + s[i] * r[(i, j)] * e[j]);
    a * v
}

fn identity_plus(k: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let mut m = k.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += 1.0;
    }
    m
}

/// det(I + K(z)).
pub fn fredholm_determinant(disc: &SupportDiscretization, z: Complex64) -> Complex64 {
    identity_plus(&birman_schwinger(disc, z)).determinant()
}

/// Singular values of I + K(z) in decreasing order.
pub fn singular_values(disc: &SupportDiscretization, z: Complex64) -> Vec<f64> {
    let mut s: Vec<f64> = identity_plus(&birman_schwinger(disc, z)).singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Perturbed resolvent (I + K)⁻¹R₀ f on the support nodes.
pub fn perturbed_resolvent(
    disc: &SupportDiscretization,
    z: Complex64,
    f: &(dyn Fn(f64) -> f64 + Sync),
    f_support: (f64, f64),
    f_breaks: &[f64],
) -> Result<Vec<Complex64>> {
    let r0 = continued_free_resolvent(z, f, f_support, f_breaks, &disc.nodes)?;
    let m = identity_plus(&birman_schwinger(disc, z));
    let lu = m.lu();
    let sol = lu.solve(&nalgebra::DVector::from_vec(r0)).ok_or_else(|| LabError::Numerical(format!("I + K(z) is singular at z = {z}")))?;
    Ok(sol.as_slice().to_vec())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanWindow {
    pub re: (f64, f64),
    pub im: (f64, f64),
    pub n_re: usize,
    pub n_im: usize,
}

impl ScanWindow {
    pub fn validate(&self) -> Result<()> {
        if !(self.re.1 > self.re.0 && self.im.1 > self.im.0) || self.n_re < 3 || self.n_im < 3 {
            return Err(param("window", "need increasing ranges and at least 3 points per axis"));
        }
        if self.re.0 <= 0.0 && self.re.1 >= 0.0 && self.im.0 <= 0.0 && self.im.1 >= 0.0 {
            return Err(param("window", "the window must exclude z = 0"));
        }
        Ok(())
    }

    fn point(&self, i: usize, j: usize) -> Complex64 {
        let r = self.re.0 + (self.re.1 - self.re.0) * i as f64 / (self.n_re - 1) as f64;
        let m = self.im.0 + (self.im.1 - self.im.0) * j as f64 / (self.n_im - 1) as f64;
        Complex64::new(r, m)
    }

    fn spacing(&self) -> f64 {
        ((self.re.1 - self.re.0) / (self.n_re - 1) as f64).min((self.im.1 - self.im.0) / (self.n_im - 1) as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub z: Complex64,
    pub lambda: Complex64,
    pub min_sv: f64,
    pub rank: usize,
    pub winding: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceReport {
    pub window: ScanWindow,
    pub poles: Vec<Pole>,
    /// Local minima whose refinement failed to converge or confirm.
    pub flagged: Vec<Complex64>,
    /// (Re z, Im z, log₁₀ σ_min) over the scan grid.
    pub heatmap: Vec<(f64, f64, f64)>,
}

/// Winding number of det(I + K) around a circle of radius r about z0.
pub fn winding_number(disc: &SupportDiscretization, z0: Complex64, r: f64, points: usize) -> i64 {
    let vals: Vec<Complex64> =
        (0..points).into_par_iter().map(|k| fredholm_determinant(disc, z0 + Complex64::from_polar(r, 2.0 * PI * k as f64 / points as f64))).collect();
    let mut total = 0.0;
    for k in 0..points {
        total += (vals[(k + 1) % points] / vals[k]).arg();
    }
    (total / (2.0 * PI)).round() as i64
}

fn newton(disc: &SupportDiscretization, mut z: Complex64) -> Option<Complex64> {
    for _ in 0..60 {
        let h = 1e-6 * (1.0 + z.norm());
        let d = fredholm_determinant(disc, z);
        let dp = (fredholm_determinant(disc, z + h) - fredholm_determinant(disc, z - h)) / (2.0 * h);
        if !(dp.norm() > 0.0) {
            return None;
        }
        let step = d / dp;
        z -= step;
        if !z.re.is_finite() || !z.im.is_finite() {
            return None;
        }
        if step.norm() < 1e-13 * (1.0 + z.norm()) {
            return Some(z);
        }
    }
    None
}

/// Scan σ_min(I + K(z)) over the window, refine local minima and confirm them by winding.
pub fn resonance_scan(disc: &SupportDiscretization, window: &ScanWindow, candidate_threshold: f64) -> Result<ResonanceReport> {
    window.validate()?;
    let (nr, ni) = (window.n_re, window.n_im);
    let grid: Vec<f64> = (0..nr * ni)
        .into_par_iter()
        .map(|k| {
            let s = singular_values(disc, window.point(k / ni, k % ni));
            *s.last().unwrap()
        })
        .collect();
    let at = |i: usize, j: usize| grid[i * ni + j];
    let mut candidates = Vec::new();
    if !disc.is_trivial() {
        for i in 0..nr {
            for j in 0..ni {
                let v = at(i, j);
                if v >= candidate_threshold {
                    continue;
                }
                let mut is_min = true;
                for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        let (a, b) = (i as i64 + di, j as i64 + dj);
                        if (di, dj) != (0, 0) && a >= 0 && b >= 0 && (a as usize) < nr && (b as usize) < ni && at(a as usize, b as usize) < v {
                            is_min = false;
                        }
                    }
                }
                if is_min {
                    candidates.push(window.point(i, j));
                }
            }
        }
    }
    let radius = 0.5 * window.spacing();
    let refined: Vec<(Complex64, Option<Pole>)> = candidates
        .par_iter()
        .map(|&c| {
            let Some(z) = newton(disc, c) else { return (c, None) };
            let inside = z.re >= window.re.0 - radius && z.re <= window.re.1 + radius && z.im >= window.im.0 - radius && z.im <= window.im.1 + radius;
            let s = singular_values(disc, z);
            let min_sv = *s.last().unwrap();
            let winding = winding_number(disc, z, radius, 64);
            if !inside || min_sv >= 1e-6 || winding < 1 {
                return (c, None);
            }
            let rank = s.iter().filter(|v| **v < 1e-6 * s[0].max(1.0)).count();
            let sc = SheetCoordinate::new(z, disc.threshold);
            (c, Some(Pole { z, lambda: sc.lambda(), min_sv, rank, winding }))
        })
        .collect();
    let mut poles: Vec<Pole> = Vec::new();
    let mut flagged = Vec::new();
    for (c, p) in refined {
        match p {
            Some(p) if poles.iter().all(|q| (q.z - p.z).norm() > 1e-8) => poles.push(p),
            Some(_) => {}
            None => flagged.push(c),
        }
    }
    poles.sort_by(|a, b| a.z.re.total_cmp(&b.z.re));
    let heatmap = (0..nr * ni)
        .map(|k| {
            let z = window.point(k / ni, k % ni);
            (z.re, z.im, grid[k].log10())
        })
        .collect();
    Ok(ResonanceReport { window: window.clone(), poles, flagged, heatmap })
}

/// δ, ρ, ζ of the weighted-space triple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightTriple {
    pub delta: DecayProfile,
    pub rho: DecayProfile,
    pub zeta: DecayProfile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    /// sup β²/(ĩ^{4n}ρδζ) over the grid.
    pub c: f64,
    pub tail: TailFit,
    pub pass: bool,
}

/// Checks β² ≤ C ĩ^{4n} ρ δ ζ with n = dim M, profiles evaluated at 1 + distance.
pub fn weight_compatibility_check(beta: &DecayProfile, triple: &WeightTriple, inj: &InjectivityModel) -> Result<CompatibilityReport> {
    for p in [beta, &triple.delta, &triple.rho, &triple.zeta] {
        p.validate()?;
    }
    let n = inj.metric.dim() as f64;
    let xs = geometric_grid(0.01, 1e3, 400);
    let ln: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let y = 1.0 + x;
            2.0 * beta.ln_value(y) - 4.0 * n * inj.ln_itilde(x) - triple.rho.ln_value(y) - triple.delta.ln_value(y) - triple.zeta.ln_value(y)
        })
        .collect();
    let tail = tail_growth(&xs, &ln);
    let c = ln.iter().cloned().fold(f64::NEG_INFINITY, f64::max).exp();
    Ok(CompatibilityReport { c, pass: c.is_finite() && tail.bounded, tail })
}

/// Refuses a discretization whose perturbation is incompatible with the weights.
pub fn require_compatible(beta: &DecayProfile, triple: &WeightTriple, inj: &InjectivityModel) -> Result<CompatibilityReport> {
    let r = weight_compatibility_check(beta, triple, inj)?;
    if !r.pass {
        return Err(LabError::Refused(format!("β² ≤ C ĩ^(4n) ρ δ ζ fails: ratio rises by {:.2} in log over the tail", r.tail.log_rise)));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{build_mode_operator, EndModel, Formulation, GridSpec};

    fn well() -> Coefficients {
        Coefficients { base: BaseCoefficients::LogX { n: 2, lambda: 0.0 }, x_min: 0.0, perturbation: Some(Perturbation::SquareWell { depth: 6.0, width: 2.0 }) }
    }

    #[test]
    fn literal_kernel_value() {
        let z = Complex64::new(0.0, 1.25f64.sqrt());
        let v = model_kernel(1, 2.0, 1.0, z, KernelVariant::Literal).unwrap();
        assert!((v.re - 0.58275).abs() < 1e-4 && v.im.abs() < 1e-14, "{v}");
        for u in [1.0, 3.0, 50.0] {
            assert_eq!(model_kernel(2, u, 1.0, z, KernelVariant::Dirichlet).unwrap(), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn dirichlet_kernel_matches_dense_inverse() {
        let n = 2;
        let end = EndModel::flat_torus_cusp(n, 1).unwrap();
        let lam = -1.0;
        let z = SheetCoordinate::from_lambda(Complex64::new(lam, 0.0), 1.0).z;
        let mut errs = Vec::new();
        for pts in [199usize, 399] {
            let op = build_mode_operator(&end, 0, &GridSpec::geometric(1.0, 8f64.exp(), pts), Formulation::CuspU).unwrap();
            let mut a = op.dense();
            for i in 0..op.len() {
                for j in 0..op.len() {
                    a[(i, j)] *= op.mass[i];
                }
                a[(i, i)] -= lam * op.mass[i];
            }
            let inv = a.try_inverse().unwrap();
            let x = op.nodes();
            let j = op.len() / 4;
            let mut worst: f64 = 0.0;
            for i in 0..op.len() / 2 {
                let g = model_kernel(n, x[i], x[j], z, KernelVariant::Dirichlet).unwrap();
                worst = worst.max((g.re - inv[(i, j)]).abs() / g.norm().max(inv[(j, j)].abs() * 1e-3));
            }
            let dx = 8.0 / (pts + 1) as f64;
            assert!(worst <= 5.0 * dx * dx, "{worst} {dx}");
            errs.push(worst);
        }
        assert!(errs[1] < errs[0]);
    }

    #[test]
    fn schwarz_symmetry_and_zero_perturbation() {
        let d = SupportDiscretization::new(&well(), 0.5, 16).unwrap();
        let z = Complex64::new(2.0, -0.7);
        let a = fredholm_determinant(&d, z);
        let b = fredholm_determinant(&d, -z.conj());
        assert!((a - b.conj()).norm() < 1e-10 * a.norm());
        let free = Coefficients { perturbation: None, ..well() };
        let d0 = SupportDiscretization::new(&free, 0.5, 16).unwrap();
        assert!(birman_schwinger(&d0, z).iter().all(|v| v.norm() == 0.0));
        let f = |x: f64| if x < 1.0 { x } else { 0.0 };
        assert!(continued_free_resolvent(z, &|_| 0.0, (0.0, 1.0), &[], &[0.5, 3.0]).unwrap().iter().all(|v| v.norm() == 0.0));
        let small = continued_free_resolvent(Complex64::new(1e-10, 0.0), &f, (0.0, 1.0), &[], &[2.0]).unwrap()[0];
        // z → 0: ∫ x_< f = ∫₀¹ y² dy
        assert!((small - 1.0 / 3.0).norm() < 1e-8);
    }

    #[test]
    fn k_decays_up_the_physical_sheet() {
        let d = SupportDiscretization::new(&well(), 0.5, 16).unwrap();
        let norms: Vec<f64> = [1.0, 4.0, 16.0].iter().map(|t| birman_schwinger(&d, Complex64::new(0.5, *t)).norm()).collect();
        assert!(norms[0] > norms[1] && norms[1] > norms[2] && norms[2] < 0.5, "{norms:?}");
    }

    #[test]
    fn square_well_first_pole() {
        let d = SupportDiscretization::new(&well(), 0.5, 16).unwrap();
        let w = ScanWindow { re: (2.5, 3.5), im: (-1.0, -0.3), n_re: 21, n_im: 15 };
        let r = resonance_scan(&d, &w, 0.5).unwrap();
        assert_eq!(r.poles.len(), 1, "{:?}", r.poles);
        let p = &r.poles[0];
        assert!((p.z - Complex64::new(2.98803676, -0.66853786)).norm() < 1e-6, "{}", p.z);
        assert!(p.winding >= 1 && p.rank == 1);
    }

    #[test]
    fn compatibility_bookkeeping() {
        use crate::geometry::{injectivity_envelope, WarpedMetric};
        let inj = injectivity_envelope(&WarpedMetric::cusp(1), 0.0).unwrap();
        let eps = 0.6;
        let beta = DecayProfile::exponential(4.0 + eps).unwrap();
        let triple = |c: f64| {
            let e = DecayProfile::exponential(c).unwrap();
            WeightTriple { delta: e.clone(), rho: e.clone(), zeta: e }
        };
        assert!(weight_compatibility_check(&beta, &triple(0.9 * eps / 4.0), &inj).unwrap().pass);
        assert!(!weight_compatibility_check(&beta, &triple(eps), &inj).unwrap().pass);
        assert!(require_compatible(&beta, &triple(eps), &inj).is_err());
    }
}
