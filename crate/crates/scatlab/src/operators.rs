//! Per-mode Laplacians on cusp and cylinder ends as symmetric divergence-form
//! finite differences, weighted norms and coefficient-difference decompositions.

use crate::decay::DecayProfile;
use crate::error::{param, LabError, Result};
use crate::numerics::tridiag::{eigh_tridiagonal, kth_eigenvalue};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Cross-section data of an end: distinct eigenvalues with multiplicities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EndModel {
    /// Cusp over a flat n-torus with cross-section eigenvalues λ_k.
    Cusp { fiber_dim: usize, lambdas: Vec<f64>, multiplicities: Vec<usize> },
    /// Cylinder over a closed manifold with eigenvalues μ_k.
    Cylinder { mus: Vec<f64>, multiplicities: Vec<usize> },
}

fn lattice_spectrum(dim: usize, k_max: usize) -> (Vec<f64>, Vec<usize>) {
    // |m|² for m ∈ Zⁿ, distinct values in increasing order, first k_max of them
    let mut r = 1i64;
    loop {
        let mut vals: Vec<i64> = Vec::new();
        let side = (2 * r + 1) as usize;
        let total = side.pow(dim as u32);
        for idx in 0..total {
            let mut t = idx;
            let mut s = 0i64;
            for _ in 0..dim {
                let m = (t % side) as i64 - r;
                t /= side;
                s += m * m;
            }
            vals.push(s);
        }
        vals.sort_unstable();
        let mut distinct: Vec<(i64, usize)> = Vec::new();
        for v in vals {
            match distinct.last_mut() {
                Some((d, c)) if *d == v => *c += 1,
                _ => distinct.push((v, 1)),
            }
        }
        // values below r² are complete
        let complete: Vec<_> = distinct.into_iter().filter(|(v, _)| *v <= r * r).collect();
        if complete.len() >= k_max {
            let take = &complete[..k_max];
            return (take.iter().map(|(v, _)| *v as f64).collect(), take.iter().map(|(_, c)| *c).collect());
        }
        r += 1;
    }
}

impl EndModel {
    /// Cusp over the flat torus Rⁿ/(2πZ)ⁿ, first `k_max` distinct cross-section eigenvalues.
    pub fn flat_torus_cusp(fiber_dim: usize, k_max: usize) -> Result<Self> {
        if fiber_dim == 0 || k_max == 0 {
            return Err(param("fiber_dim", "need fiber_dim ≥ 1 and k_max ≥ 1"));
        }
        let (lambdas, multiplicities) = lattice_spectrum(fiber_dim, k_max);
        Ok(EndModel::Cusp { fiber_dim, lambdas, multiplicities })
    }

    /// Cylinder over a circle of circumference 2π: μ_k = k².
    pub fn circle_cylinder(k_max: usize) -> Result<Self> {
        if k_max == 0 {
            return Err(param("k_max", "need at least one mode"));
        }
        let mus = (0..k_max).map(|k| (k * k) as f64).collect();
        let multiplicities = (0..k_max).map(|k| if k == 0 { 1 } else { 2 }).collect();
        Ok(EndModel::Cylinder { mus, multiplicities })
    }

    pub fn validate(&self) -> Result<()> {
        let (v, m) = match self {
            EndModel::Cusp { fiber_dim, lambdas, multiplicities } => {
                if *fiber_dim == 0 {
                    return Err(param("fiber_dim", "must be at least 1"));
                }
                if lambdas.first() != Some(&0.0) {
                    return Err(param("lambdas", "cusp cross-section spectrum must start at 0"));
                }
                (lambdas, multiplicities)
            }
            EndModel::Cylinder { mus, multiplicities } => (mus, multiplicities),
        };
        if v.is_empty() || v.len() != m.len() {
            return Err(param("modes", "eigenvalues and multiplicities must be nonempty and of equal length"));
        }
        if v.windows(2).any(|w| !(w[0] < w[1])) || v.iter().any(|x| !(*x >= 0.0)) {
            return Err(param("modes", "eigenvalues must be nonnegative and strictly increasing"));
        }
        Ok(())
    }

    pub fn mode_count(&self) -> usize {
        match self {
            EndModel::Cusp { lambdas, .. } => lambdas.len(),
            EndModel::Cylinder { mus, .. } => mus.len(),
        }
    }

    pub fn mode_eigenvalue(&self, k: usize) -> Result<f64> {
        let v = match self {
            EndModel::Cusp { lambdas, .. } => lambdas,
            EndModel::Cylinder { mus, .. } => mus,
        };
        v.get(k).copied().ok_or_else(|| param("mode", format!("mode {k} beyond k_max = {}", v.len())))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    CuspU,
    LogX,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Uniform,
    Geometric,
}

/// Nodes x_0 < … < x_{points+1}; the endpoints carry the Dirichlet condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    /// Number of interior nodes.
    pub points: usize,
    pub spacing: Spacing,
    /// Top of the spectral range of interest, for the resolution check.
    #[serde(default)]
    pub lambda_top: Option<f64>,
}

impl GridSpec {
    pub fn uniform(x_min: f64, x_max: f64, points: usize) -> Self {
        GridSpec { x_min, x_max, points, spacing: Spacing::Uniform, lambda_top: None }
    }

    pub fn geometric(x_min: f64, x_max: f64, points: usize) -> Self {
        GridSpec { x_min, x_max, points, spacing: Spacing::Geometric, lambda_top: None }
    }

    fn nodes(&self) -> Result<Vec<f64>> {
        if !(self.x_max > self.x_min) || self.points < 2 {
            return Err(param("grid", "need x_max > x_min and at least 2 interior points"));
        }
        let m = self.points + 1;
        Ok(match self.spacing {
            Spacing::Uniform => (0..=m).map(|i| self.x_min + (self.x_max - self.x_min) * i as f64 / m as f64).collect(),
            Spacing::Geometric => {
                if !(self.x_min > 0.0) {
                    return Err(param("grid", "geometric spacing needs x_min > 0"));
                }
                let (a, b) = (self.x_min.ln(), self.x_max.ln());
                (0..=m).map(|i| (a + (b - a) * i as f64 / m as f64).exp()).collect()
            }
        })
    }
}

/// Coefficient perturbation p(1+ε_p η), w(1+ε_w η), q+ε_q η or a square well in q.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    /// η = β(1 + distance from the start of the end).
    Envelope { beta: DecayProfile, eps_p: f64, eps_w: f64, eps_q: f64 },
    /// q ↦ q − depth on the first `width` units of distance.
    SquareWell { depth: f64, width: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseCoefficients {
    /// p = u^{1−n}, w = u^{−(n+1)}, q = u²λ.
    CuspU { n: usize, lambda: f64 },
    /// p = w = 1, q = n²/4 + λe^{2x}.
    LogX { n: usize, lambda: f64 },
    /// p = w = 1, q = μ.
    Cylinder { mu: f64 },
}

/// Sturm–Liouville coefficients of −(1/w)(p f′)′ + q f.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub base: BaseCoefficients,
    pub x_min: f64,
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
}

impl Coefficients {
    /// Distance from the start of the end and its coordinate derivative.
    fn distance(&self, x: f64) -> (f64, f64) {
        match self.base {
            BaseCoefficients::CuspU { .. } => ((x / self.x_min).ln(), 1.0 / x),
            _ => (x - self.x_min, 1.0),
        }
    }

    /// d(coordinate)/d(arc length).
    pub fn dcoord_ds(&self, x: f64) -> f64 {
        match self.base {
            BaseCoefficients::CuspU { .. } => x,
            _ => 1.0,
        }
    }

    fn eta(&self, x: f64) -> (f64, f64) {
        match &self.perturbation {
            Some(Perturbation::Envelope { beta, .. }) => {
                let (d, dd) = self.distance(x);
                let j = beta.jet(1.0 + d, 1);
                (j.value(), j.deriv(1) * dd)
            }
            _ => (0.0, 0.0),
        }
    }

    fn base_pw(&self, x: f64) -> (f64, f64, f64, f64) {
        // (p, p', w, w')
        match self.base {
            BaseCoefficients::CuspU { n, .. } => {
                let n = n as f64;
                let p = x.powf(1.0 - n);
                let w = x.powf(-(n + 1.0));
                (p, (1.0 - n) * p / x, w, -(n + 1.0) * w / x)
            }
            _ => (1.0, 0.0, 1.0, 0.0),
        }
    }

    fn eps(&self) -> (f64, f64, f64) {
        match &self.perturbation {
            Some(Perturbation::Envelope { eps_p, eps_w, eps_q, .. }) => (*eps_p, *eps_w, *eps_q),
            _ => (0.0, 0.0, 0.0),
        }
    }

    pub fn p(&self, x: f64) -> f64 {
        let (p, ..) = self.base_pw(x);
        p * (1.0 + self.eps().0 * self.eta(x).0)
    }

    pub fn dp(&self, x: f64) -> f64 {
        let (p, dp, ..) = self.base_pw(x);
        let (e, de) = self.eta(x);
        let ep = self.eps().0;
        dp * (1.0 + ep * e) + p * ep * de
    }

    pub fn w(&self, x: f64) -> f64 {
        let (_, _, w, _) = self.base_pw(x);
        w * (1.0 + self.eps().1 * self.eta(x).0)
    }

    pub fn q(&self, x: f64) -> f64 {
        let base = match self.base {
            BaseCoefficients::CuspU { lambda, .. } => x * x * lambda,
            BaseCoefficients::LogX { n, lambda } => (n * n) as f64 / 4.0 + lambda * (2.0 * x).exp(),
            BaseCoefficients::Cylinder { mu } => mu,
        };
        match &self.perturbation {
            Some(Perturbation::SquareWell { depth, width }) => {
                if self.distance(x).0 <= *width {
                    base - depth
                } else {
                    base
                }
            }
            _ => base + self.eps().2 * self.eta(x).0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteOperator {
    /// All nodes including the two Dirichlet endpoints.
    pub grid: Vec<f64>,
    /// Mass M_i = w_i·(h_{i−½}+h_{i+½})/2 at interior nodes.
    pub mass: Vec<f64>,
    /// Symmetric stiffness S (tridiagonal); the operator is M⁻¹S.
    pub stiff_diag: Vec<f64>,
    pub stiff_off: Vec<f64>,
    pub mode: usize,
    pub coefficients: Coefficients,
    pub warnings: Vec<String>,
}

/// Eigenpairs of a discrete operator; `vectors` are orthonormal in the M-inner product.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

fn assemble(coef: Coefficients, grid: Vec<f64>, mode: usize, lambda_top: Option<f64>) -> Result<DiscreteOperator> {
    let n = grid.len() - 2;
    let mut mass = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    let mut pm = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let mid = 0.5 * (grid[k] + grid[k + 1]);
        let p = coef.p(mid);
        if !(p > 0.0) {
            return Err(LabError::Validation(format!("ellipticity lost: p = {p} at x = {mid}")));
        }
        pm.push(p / (grid[k + 1] - grid[k]));
    }
    for i in 0..n {
        let x = grid[i + 1];
        let w = coef.w(x);
        if !(w > 0.0) {
            return Err(LabError::Validation(format!("non-positive weight w = {w} at node {} (x = {x})", i + 1)));
        }
        let (hl, hr) = (x - grid[i], grid[i + 2] - x);
        mass[i] = w * 0.5 * (hl + hr);
        // dual-cell average of q, so a jump inside the cell is split between its halves
        let qbar = (hl * coef.q(x - 0.25 * hl) + hr * coef.q(x + 0.25 * hr)) / (hl + hr);
        diag[i] = pm[i] + pm[i + 1] + qbar * mass[i];
        if i + 1 < n {
            off[i] = -pm[i + 1];
        }
    }
    let mut warnings = Vec::new();
    if let Some(top) = lambda_top {
        let mut worst = f64::INFINITY;
        for i in 0..n {
            let x = grid[i + 1];
            let k2 = (top - coef.q(x)) * coef.w(x) / coef.p(x);
            if k2 > 0.0 {
                let h = (grid[i + 2] - grid[i]) * 0.5;
                worst = worst.min(2.0 * std::f64::consts::PI / (k2.sqrt() * h));
            }
        }
        if worst < 20.0 {
            warnings.push(format!("under-resolved grid: {worst:.2} points per wavelength at λ = {top}"));
        }
    }
    Ok(DiscreteOperator { grid, mass, stiff_diag: diag, stiff_off: off, mode, coefficients: coef, warnings })
}

/// Discretized mode-k operator of an end on Dirichlet grid `grid`.
pub fn build_mode_operator(end: &EndModel, mode: usize, grid: &GridSpec, formulation: Formulation) -> Result<DiscreteOperator> {
    end.validate()?;
    let ev = end.mode_eigenvalue(mode)?;
    let base = match (end, formulation) {
        (EndModel::Cusp { fiber_dim, .. }, Formulation::CuspU) => {
            if !(grid.x_min >= 1.0) {
                return Err(param("grid", "cusp_u formulation lives on u ≥ 1"));
            }
            BaseCoefficients::CuspU { n: *fiber_dim, lambda: ev }
        }
        (EndModel::Cusp { fiber_dim, .. }, Formulation::LogX) => BaseCoefficients::LogX { n: *fiber_dim, lambda: ev },
        (EndModel::Cylinder { .. }, _) => BaseCoefficients::Cylinder { mu: ev },
    };
    let coef = Coefficients { base, x_min: grid.x_min, perturbation: None };
    assemble(coef, grid.nodes()?, mode, grid.lambda_top)
}

impl DiscreteOperator {
    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Interior nodes.
    pub fn nodes(&self) -> &[f64] {
        &self.grid[1..self.grid.len() - 1]
    }

    /// Tridiagonal B = M^{−½} S M^{−½}, unitarily equivalent to the operator.
    pub fn symmetric_tridiagonal(&self) -> (Vec<f64>, Vec<f64>) {
        let s: Vec<f64> = self.mass.iter().map(|m| m.sqrt()).collect();
        let d = self.stiff_diag.iter().zip(&self.mass).map(|(a, m)| a / m).collect();
        let o = self.stiff_off.iter().enumerate().map(|(i, a)| a / (s[i] * s[i + 1])).collect();
        (d, o)
    }

    /// A f = M⁻¹ S f at interior nodes.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut v = self.stiff_diag[i] * f[i];
                if i > 0 {
                    v += self.stiff_off[i - 1] * f[i - 1];
                }
                if i + 1 < n {
                    v += self.stiff_off[i] * f[i + 1];
                }
                v / self.mass[i]
            })
            .collect()
    }

    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter().zip(g).zip(&self.mass).map(|((a, b), m)| a * b * m).sum()
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// Relative defect |⟨Af,g⟩ − ⟨f,Ag⟩| / (‖Af‖‖g‖ + ‖f‖‖Ag‖) on the given vectors.
    pub fn symmetry_defect(&self, f: &[f64], g: &[f64]) -> f64 {
        let (af, ag) = (self.apply(f), self.apply(g));
        let num = (self.inner(&af, g) - self.inner(f, &ag)).abs();
        num / (self.norm(&af) * self.norm(g) + self.norm(f) * self.norm(&ag))
    }

    /// The k-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        if k >= self.len() {
            return Err(param("k", "eigenvalue index beyond operator size"));
        }
        let (d, o) = self.symmetric_tridiagonal();
        Ok(kth_eigenvalue(&d, &o, k))
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let (d, o) = self.symmetric_tridiagonal();
        Ok(eigh_tridiagonal(&d, &o, false)?.values)
    }

    /// Full eigendecomposition with M-orthonormal eigenvectors.
    pub fn spectrum(&self) -> Result<Spectrum> {
        let (d, o) = self.symmetric_tridiagonal();
        let e = eigh_tridiagonal(&d, &o, true)?;
        let mut v = e.vectors.expect("vectors requested");
        for (i, m) in self.mass.iter().enumerate() {
            let s = 1.0 / m.sqrt();
            v.row_mut(i).scale_mut(s);
        }
        Ok(Spectrum { values: e.values, vectors: v })
    }

    /// Dense matrix of A = M⁻¹S.
    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = self.stiff_diag[i] / self.mass[i];
            if i + 1 < n {
                a[(i, i + 1)] = self.stiff_off[i] / self.mass[i];
                a[(i + 1, i)] = self.stiff_off[i] / self.mass[i + 1];
            }
        }
        a
    }

    /// Same operator truncated to the nodes with coordinate ≥ b (Dirichlet at the first node ≥ b).
    pub fn truncated_from(&self, b: f64) -> Result<DiscreteOperator> {
        let start = self.grid.iter().position(|x| *x >= b).ok_or_else(|| param("b", "truncation point beyond grid"))?;
        if self.grid.len() - start < 4 {
            return Err(param("b", "truncation leaves fewer than 2 interior points"));
        }
        assemble(self.coefficients.clone(), self.grid[start..].to_vec(), self.mode, None)
    }
}

/// Log-coordinate operator unitarily equivalent to a cusp_u operator, on x = ln u.
pub fn conjugation_oracle(op: &DiscreteOperator) -> Result<DiscreteOperator> {
    let (n, lambda) = match op.coefficients.base {
        BaseCoefficients::CuspU { n, lambda } if op.coefficients.perturbation.is_none() => (n, lambda),
        _ => return Err(LabError::Input("conjugation oracle needs an unperturbed cusp_u operator".into())),
    };
    let grid: Vec<f64> = op.grid.iter().map(|u| u.ln()).collect();
    let coef = Coefficients { base: BaseCoefficients::LogX { n, lambda }, x_min: grid[0], perturbation: None };
    assemble(coef, grid, op.mode, None)
}

/// (Vf)(x) = e^{−nx/2} f(eˣ) for samples f(u_i) at nodes u_i.
pub fn to_log_coordinates(n: usize, u: &[f64], f: &[f64]) -> Vec<f64> {
    u.iter().zip(f).map(|(u, f)| f * u.powf(-(n as f64) / 2.0)).collect()
}

/// Inverse of [`to_log_coordinates`].
pub fn from_log_coordinates(n: usize, u: &[f64], g: &[f64]) -> Vec<f64> {
    u.iter().zip(g).map(|(u, g)| g * u.powf(n as f64 / 2.0)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    W,
    H,
}

/// Discrete derivative d/ds (arc length) of f with zero boundary values.
fn arc_derivative(op: &DiscreteOperator, f: &[f64]) -> Vec<f64> {
    let g = &op.grid;
    let n = f.len();
    let val = |k: usize| if k == 0 || k == n + 1 { 0.0 } else { f[k - 1] };
    (1..=n)
        .map(|k| {
            let (h0, h1) = (g[k] - g[k - 1], g[k + 1] - g[k]);
            let d = (val(k + 1) - val(k)) * h0 / (h1 * (h0 + h1)) + (val(k) - val(k - 1)) * h1 / (h0 * (h0 + h1));
            d * op.coefficients.dcoord_ds(g[k])
        })
        .collect()
}

/// Weighted Sobolev norm: W-kind (Σ_{i≤k} ‖∂_s^i f‖²_{L²_ξ})^{½}, H-kind ‖(A+I)^{k/2} f‖_{L²_ξ}.
pub fn weighted_norm(op: &DiscreteOperator, f: &[f64], xi: &[f64], k: usize, kind: NormKind, spectrum: Option<&Spectrum>) -> Result<f64> {
    if f.len() != op.len() || xi.len() != op.len() {
        return Err(LabError::Input("function and weight must be sampled at the interior nodes".into()));
    }
    if k + 2 > op.len() {
        return Err(param("k", "derivative order does not fit inside the grid"));
    }
    let l2 = |g: &[f64]| g.iter().zip(xi).zip(&op.mass).map(|((a, x), m)| a * a * x * m).sum::<f64>();
    match kind {
        NormKind::W => {
            let mut total = l2(f);
            let mut d = f.to_vec();
            for _ in 0..k {
                d = arc_derivative(op, &d);
                total += l2(&d);
            }
            Ok(total.sqrt())
        }
        NormKind::H if k.is_multiple_of(2) => {
            let mut g = f.to_vec();
            for _ in 0..k / 2 {
                let ag = op.apply(&g);
                g = ag.iter().zip(&g).map(|(a, b)| a + b).collect();
            }
            Ok(l2(&g).sqrt())
        }
        NormKind::H => {
            let sp = spectrum.ok_or_else(|| LabError::Capability("odd-order H norm needs spectral data".into()))?;
            let fm = DVector::from_iterator(f.len(), f.iter().zip(&op.mass).map(|(a, m)| a * m));
            let coeffs = sp.vectors.transpose() * fm;
            let scaled = DVector::from_iterator(coeffs.len(), coeffs.iter().zip(&sp.values).map(|(c, l)| c * (1.0 + l).powf(k as f64 / 2.0)));
            let g = &sp.vectors * scaled;
            Ok(l2(g.as_slice()).sqrt())
        }
    }
}

/// Δ_g − Δ_h = ξ₀ + ξ₁∂ + ξ₂∂² sampled at the interior nodes (coordinate derivatives).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferenceDecomposition {
    pub nodes: Vec<f64>,
    pub xi0: Vec<f64>,
    pub xi1: Vec<f64>,
    pub xi2: Vec<f64>,
    /// sup_x |ξ_j|·(ds/dcoord)^{−j}… normalized to unit-speed derivatives, divided by η.
    pub fitted_c: [f64; 3],
}

/// Perturbed operator and the coefficient decomposition of the difference.
pub fn perturb_operator(op: &DiscreteOperator, perturbation: &Perturbation) -> Result<(DiscreteOperator, DifferenceDecomposition)> {
    if let Perturbation::Envelope { beta, .. } = perturbation {
        beta.validate()?;
    }
    let mut coef = op.coefficients.clone();
    coef.perturbation = Some(perturbation.clone());
    let h = assemble(coef, op.grid.clone(), op.mode, None)?;
    let (g, hc) = (&op.coefficients, &h.coefficients);
    let nodes = op.nodes().to_vec();
    let mut xi0 = Vec::with_capacity(nodes.len());
    let mut xi1 = Vec::with_capacity(nodes.len());
    let mut xi2 = Vec::with_capacity(nodes.len());
    let mut fitted_c = [0.0f64; 3];
    for &x in &nodes {
        let (x0, x1, x2) = (g.q(x) - hc.q(x), hc.dp(x) / hc.w(x) - g.dp(x) / g.w(x), hc.p(x) / hc.w(x) - g.p(x) / g.w(x));
        xi0.push(x0);
        xi1.push(x1);
        xi2.push(x2);
        let env = match perturbation {
            Perturbation::Envelope { beta, .. } => beta.value(1.0 + g.distance(x).0),
            Perturbation::SquareWell { .. } => 1.0,
        };
        let s = g.dcoord_ds(x);
        for (c, v) in fitted_c.iter_mut().zip([x0, x1 / s, x2 / (s * s)]) {
            *c = c.max(v.abs() / env);
        }
    }
    Ok((h, DifferenceDecomposition { nodes, xi0, xi1, xi2, fitted_c }))
}

impl DifferenceDecomposition {
    /// ξ₀f + ξ₁f′ + ξ₂f″ from exact derivative samples.
    pub fn apply(&self, f: &[f64], df: &[f64], d2f: &[f64]) -> Vec<f64> {
        (0..self.nodes.len()).map(|i| self.xi0[i] * f[i] + self.xi1[i] * df[i] + self.xi2[i] * d2f[i]).collect()
    }
}

/// Bottom eigenvalue of the operator restricted to [b, L] for each b, fitted against b².
pub fn truncated_bottom_growth(op: &DiscreteOperator, bs: &[f64]) -> Result<(Vec<f64>, crate::numerics::fit::LineFit)> {
    let lows = bs.iter().map(|&b| op.truncated_from(b).and_then(|t| t.eigenvalue(0))).collect::<Result<Vec<_>>>()?;
    let b2: Vec<f64> = bs.iter().map(|b| b * b).collect();
    let fit = crate::numerics::fit::fit_line(&b2, &lows);
    Ok((lows, fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn free_cusp(n: usize) -> EndModel {
        EndModel::flat_torus_cusp(n, 3).unwrap()
    }

    #[test]
    fn torus_and_circle_spectra() {
        match EndModel::flat_torus_cusp(2, 4).unwrap() {
            EndModel::Cusp { lambdas, multiplicities, .. } => {
                assert_eq!(lambdas, vec![0.0, 1.0, 2.0, 4.0]);
                assert_eq!(multiplicities, vec![1, 4, 4, 4]);
            }
            _ => unreachable!(),
        }
        let c = EndModel::circle_cylinder(4).unwrap();
        assert_eq!(c.mode_eigenvalue(3).unwrap(), 9.0);
        assert!(c.mode_eigenvalue(4).is_err());
    }

    #[test]
    fn log_threshold_box_spectrum() {
        for n in 1..=3 {
            let op = build_mode_operator(&free_cusp(n), 0, &GridSpec::uniform(0.0, 40.0, 800), Formulation::LogX).unwrap();
            let want = (n * n) as f64 / 4.0 + (PI / 40.0).powi(2);
            assert!((op.eigenvalue(0).unwrap() - want).abs() < 1e-4 * want);
        }
    }

    #[test]
    fn symmetric_in_weighted_product() {
        let op = build_mode_operator(&free_cusp(2), 1, &GridSpec::geometric(1.0, 50.0, 300), Formulation::CuspU).unwrap();
        let f: Vec<f64> = (0..op.len()).map(|i| ((i * 7919) % 101) as f64 - 50.0).collect();
        let g: Vec<f64> = (0..op.len()).map(|i| ((i * 104729) % 97) as f64 - 48.0).collect();
        assert!(op.symmetry_defect(&f, &g) < 1e-13);
    }

    #[test]
    fn eigenfunction_residual_is_second_order() {
        let (n, lam) = (2usize, 3.0);
        // u_max chosen so that the eigenfunction also vanishes there
        let u_max = (9.0 * PI / lam).exp();
        let e = |u: f64| u.powf(n as f64 / 2.0) * (lam * u.ln()).sin();
        assert_eq!(e(1.0), 0.0);
        let mut errs = vec![];
        for pts in [400, 800] {
            let op = build_mode_operator(&free_cusp(n), 0, &GridSpec::geometric(1.0, u_max, pts), Formulation::CuspU).unwrap();
            let f: Vec<f64> = op.nodes().iter().map(|&u| e(u)).collect();
            let res: Vec<f64> = op.apply(&f).iter().zip(&f).map(|(a, v)| a - (1.0 + lam * lam) * v).collect();
            errs.push(op.norm(&res) / op.norm(&f));
        }
        assert!(errs[1] < errs[0] / 3.5 && errs[0] < 0.05, "{errs:?}");
    }

    #[test]
    fn conjugation_matches_log_formulation() {
        let op = build_mode_operator(&free_cusp(2), 0, &GridSpec::geometric(1.0, 400.0, 600), Formulation::CuspU).unwrap();
        let lx = conjugation_oracle(&op).unwrap();
        let dx = 400f64.ln() / 601.0;
        for k in 0..5 {
            let (a, b) = (op.eigenvalue(k).unwrap(), lx.eigenvalue(k).unwrap());
            assert!((a - b).abs() <= 10.0 * dx * dx * b, "{k}: {a} {b}");
        }
        let u = op.nodes();
        let f: Vec<f64> = u.iter().map(|u| u.sin()).collect();
        let back = from_log_coordinates(2, u, &to_log_coordinates(2, u, &f));
        assert!(back.iter().zip(&f).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn cylinder_modes() {
        let c = EndModel::circle_cylinder(3).unwrap();
        let op = build_mode_operator(&c, 2, &GridSpec::uniform(0.0, 10.0, 500), Formulation::LogX).unwrap();
        let want = 4.0 + (PI / 10.0).powi(2);
        assert!((op.eigenvalue(0).unwrap() - want).abs() < 1e-4);
    }

    #[test]
    fn norms() {
        let c = EndModel::circle_cylinder(1).unwrap();
        let op = build_mode_operator(&c, 0, &GridSpec::uniform(0.0, PI, 400), Formulation::LogX).unwrap();
        let f: Vec<f64> = op.nodes().iter().map(|x| x.sin()).collect();
        let one = vec![1.0; op.len()];
        let l2 = weighted_norm(&op, &f, &one, 0, NormKind::W, None).unwrap();
        assert!((l2 - (PI / 2.0).sqrt()).abs() < 1e-4);
        let h2 = weighted_norm(&op, &f, &one, 2, NormKind::H, None).unwrap();
        assert!((h2 - 2.0 * l2).abs() < 1e-4);
        assert!(matches!(weighted_norm(&op, &f, &one, 1, NormKind::H, None), Err(LabError::Capability(_))));
        let sp = op.spectrum().unwrap();
        let h1 = weighted_norm(&op, &f, &one, 1, NormKind::H, Some(&sp)).unwrap();
        assert!((h1 - 2f64.sqrt() * l2).abs() < 1e-4);
        let w1 = weighted_norm(&op, &f, &one, 1, NormKind::W, None).unwrap();
        assert!((w1 - 2f64.sqrt() * l2).abs() < 1e-2 * l2);
    }

    #[test]
    fn decomposition_zero_and_reconstruction() {
        let c = EndModel::circle_cylinder(2).unwrap();
        let op = build_mode_operator(&c, 1, &GridSpec::uniform(0.0, 10.0, 400), Formulation::LogX).unwrap();
        let zero = Perturbation::Envelope { beta: DecayProfile::power_law(2.0).unwrap(), eps_p: 0.0, eps_w: 0.0, eps_q: 0.0 };
        let (_, d) = perturb_operator(&op, &zero).unwrap();
        assert!(d.xi0.iter().chain(&d.xi1).chain(&d.xi2).all(|v| *v == 0.0));
        let pert = Perturbation::Envelope { beta: DecayProfile::power_law(2.0).unwrap(), eps_p: 0.1, eps_w: 0.2, eps_q: 0.3 };
        let (h, d) = perturb_operator(&op, &pert).unwrap();
        assert!(d.fitted_c.iter().all(|c| *c < 1.0));
        let x = op.nodes();
        let f: Vec<f64> = x.iter().map(|x| (PI * x / 10.0).sin()).collect();
        let df: Vec<f64> = x.iter().map(|x| PI / 10.0 * (PI * x / 10.0).cos()).collect();
        let d2f: Vec<f64> = f.iter().map(|v| -(PI / 10.0).powi(2) * v).collect();
        let (ag, ah) = (op.apply(&f), h.apply(&f));
        let diff: Vec<f64> = ag.iter().zip(&ah).map(|(a, b)| a - b).collect();
        let rec = d.apply(&f, &df, &d2f);
        let err = diff.iter().zip(&rec).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn ellipticity_loss_reported() {
        let c = EndModel::circle_cylinder(1).unwrap();
        let op = build_mode_operator(&c, 0, &GridSpec::uniform(0.0, 10.0, 100), Formulation::LogX).unwrap();
        let bad = Perturbation::Envelope { beta: DecayProfile::exponential(0.0).unwrap(), eps_p: -2.0, eps_w: 0.0, eps_q: 0.0 };
        assert!(matches!(perturb_operator(&op, &bad), Err(LabError::Validation(_))));
    }

    #[test]
    fn resolution_warning() {
        let mut g = GridSpec::uniform(0.0, 10.0, 50);
        g.lambda_top = Some(400.0);
        let op = build_mode_operator(&EndModel::circle_cylinder(1).unwrap(), 0, &g, Formulation::LogX).unwrap();
        assert_eq!(op.warnings.len(), 1);
    }

    #[test]
    fn bottom_grows_with_truncation() {
        let op = build_mode_operator(&free_cusp(1), 1, &GridSpec::geometric(1.0, 60.0, 1500), Formulation::CuspU).unwrap();
        let (_, fit) = truncated_bottom_growth(&op, &[2.0, 4.0, 6.0, 8.0]).unwrap();
        assert!(fit.slope >= 0.9);
    }
}
