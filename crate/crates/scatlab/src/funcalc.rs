//! Functions of √Δ for discrete mode operators: spectral ground truth, the
//! cosine-transform quadrature, leapfrog wave propagation, heat and resolvent
//! evaluation, and operator norms on β-weighted spaces.

use crate::decay::DecayProfile;
use crate::error::{param, LabError, Result};
use crate::numerics::fit::{fit_line, LineFit};
use crate::numerics::quad::CompensatedSum;
use crate::operators::DiscreteOperator;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Eigenpairs of A = M⁻¹S with M-orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub mass: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn new(op: &DiscreteOperator) -> Result<Self> {
        let sp = op.spectrum()?;
        Ok(SpectralDecomposition { values: sp.values, vectors: sp.vectors, mass: op.mass.clone() })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Expansion coefficients c_j = ⟨v_j, f⟩_M.
    pub fn coefficients(&self, f: &[f64]) -> DVector<f64> {
        let fm = DVector::from_iterator(f.len(), f.iter().zip(&self.mass).map(|(a, m)| a * m));
        self.vectors.tr_mul(&fm)
    }

    pub fn synthesize(&self, c: &DVector<f64>) -> Vec<f64> {
        (&self.vectors * c).as_slice().to_vec()
    }

    /// g(A) f for a scalar function g of the eigenvalue.
    pub fn apply_fn(&self, f: &[f64], g: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut c = self.coefficients(f);
        for (cj, l) in c.iter_mut().zip(&self.values) {
            *cj *= g(*l);
        }
        self.synthesize(&c)
    }

    /// (max relative residual ‖Av−λv‖_M/‖A‖, max |VᵀMV − I|).
    pub fn audit(&self, op: &DiscreteOperator) -> (f64, f64) {
        let anorm = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let n = self.len();
        let res = (0..n)
            .into_par_iter()
            .map(|j| {
                let v: Vec<f64> = self.vectors.column(j).iter().copied().collect();
                let r: Vec<f64> = op.apply(&v).iter().zip(&v).map(|(a, b)| a - self.values[j] * b).collect();
                op.norm(&r) / anorm
            })
            .reduce(|| 0.0, f64::max);
        let mut vm = self.vectors.clone();
        for (i, m) in self.mass.iter().enumerate() {
            vm.row_mut(i).scale_mut(*m);
        }
        let g = self.vectors.tr_mul(&vm) - DMatrix::identity(n, n);
        (res, g.amax())
    }

    /// Largest eigenvalue.
    pub fn max_eigenvalue(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum PropagatorMethod {
    Spectral,
    /// Three-level leapfrog; `dt` defaults to half the stability limit.
    Leapfrog {
        dt: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagatorResult {
    pub values: Vec<f64>,
    pub method: PropagatorMethod,
    pub steps: usize,
    pub dt: f64,
    /// Relative drift of the discrete leapfrog energy.
    pub energy_drift: f64,
}

/// Upper bound for the largest eigenvalue of A (Gershgorin on the symmetric form).
pub fn spectral_radius_bound(op: &DiscreteOperator) -> f64 {
    let (d, o) = op.symmetric_tridiagonal();
    (0..d.len()).map(|i| d[i] + if i > 0 { o[i - 1].abs() } else { 0.0 } + o.get(i).map_or(0.0, |v| v.abs())).fold(0.0, f64::max)
}

/// cos(s√A) f₀.
pub fn cosine_propagator(
    op: &DiscreteOperator,
    f0: &[f64],
    s: f64,
    method: PropagatorMethod,
    spectral: Option<&SpectralDecomposition>,
) -> Result<PropagatorResult> {
    if f0.len() != op.len() {
        return Err(LabError::Input("initial data must be sampled at the interior nodes".into()));
    }
    match method {
        PropagatorMethod::Spectral => {
            let sd = spectral.ok_or_else(|| LabError::Capability("spectral propagation needs a spectral decomposition".into()))?;
            let values = sd.apply_fn(f0, |l| (s * l.max(0.0).sqrt()).cos());
            Ok(PropagatorResult { values, method, steps: 0, dt: 0.0, energy_drift: 0.0 })
        }
        PropagatorMethod::Leapfrog { dt } => leapfrog(op, f0, s, dt, method),
    }
}

fn leapfrog(op: &DiscreteOperator, f0: &[f64], s: f64, dt: Option<f64>, method: PropagatorMethod) -> Result<PropagatorResult> {
    let dt_stable = 2.0 / spectral_radius_bound(op).sqrt();
    let requested = dt.unwrap_or(0.5 * dt_stable);
    if !(requested > 0.0) || requested >= dt_stable {
        return Err(LabError::Refused(format!("time step {requested} violates the CFL limit; need dt < {dt_stable:.6e}")));
    }
    let s = s.abs();
    if s == 0.0 {
        return Ok(PropagatorResult { values: f0.to_vec(), method, steps: 0, dt: 0.0, energy_drift: 0.0 });
    }
    let steps = (s / requested).ceil() as usize;
    let dt = s / steps as f64;
    let dt2 = dt * dt;
    let energy = |prev: &[f64], cur: &[f64]| {
        let v: Vec<f64> = cur.iter().zip(prev).map(|(a, b)| (a - b) / dt).collect();
        op.inner(&v, &v) + op.inner(&op.apply(cur), prev)
    };
    let a0 = op.apply(f0);
    let mut prev = f0.to_vec();
    let mut cur: Vec<f64> = f0.iter().zip(&a0).map(|(f, a)| f - 0.5 * dt2 * a).collect();
    let e0 = energy(&prev, &cur);
    for _ in 1..steps {
        let a = op.apply(&cur);
        let next: Vec<f64> = (0..cur.len()).map(|i| 2.0 * cur[i] - prev[i] - dt2 * a[i]).collect();
        prev = std::mem::replace(&mut cur, next);
    }
    let e1 = energy(&prev, &cur);
    let energy_drift = if e0 == 0.0 { (e1 - e0).abs() } else { ((e1 - e0) / e0).abs() };
    Ok(PropagatorResult { values: cur, method, steps, dt, energy_drift })
}

/// Fraction of the weighted L² mass of `u` at nodes farther than `radius` from `x0`.
pub fn leakage_outside(op: &DiscreteOperator, u: &[f64], x0: f64, radius: f64) -> f64 {
    let mut out = CompensatedSum::default();
    let mut total = CompensatedSum::default();
    for ((x, v), m) in op.nodes().iter().zip(u).zip(&op.mass) {
        let e = v * v * m;
        total.add(e);
        if (x - x0).abs() > radius {
            out.add(e);
        }
    }
    out.value() / total.value()
}

/// C^∞ bump exp(−1/(1−r²)) of half-width `delta` centred at `x0`, unit M-mass.
pub fn mollified_point_mass(op: &DiscreteOperator, x0: f64, delta: f64) -> Vec<f64> {
    let f: Vec<f64> = op
        .nodes()
        .iter()
        .map(|x| {
            let r = (x - x0) / delta;
            if r.abs() < 1.0 {
                (-1.0 / (1.0 - r * r)).exp()
            } else {
                0.0
            }
        })
        .collect();
    let norm = op.norm(&f);
    f.iter().map(|v| v / norm).collect()
}

/// Even transform pairs f(σ) ↔ f̂(y) = ∫ f(σ) e^{−iyσ} dσ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformPair {
    /// f(σ) = e^{−tσ²}, f̂(y) = √(π/t) e^{−y²/4t}.
    Gaussian { t: f64 },
    /// f(σ) = 1/(λ₀+σ²), f̂(y) = (π/√λ₀) e^{−√λ₀|y|}.
    Resolvent { lambda0: f64 },
}

impl TransformPair {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TransformPair::Gaussian { t } if !(t > 0.0) => Err(LabError::Refused(format!("f̂ is not integrable for t = {t}"))),
            TransformPair::Resolvent { lambda0 } if !(lambda0 > 0.0) => Err(LabError::Refused(format!("f̂ is not integrable for λ₀ = {lambda0}"))),
            _ => Ok(()),
        }
    }

    pub fn fhat(&self, y: f64) -> f64 {
        match *self {
            TransformPair::Gaussian { t } => (PI / t).sqrt() * (-y * y / (4.0 * t)).exp(),
            TransformPair::Resolvent { lambda0 } => PI / lambda0.sqrt() * (-lambda0.sqrt() * y.abs()).exp(),
        }
    }

    /// f(σ), the function applied to √A.
    pub fn f(&self, sigma: f64) -> f64 {
        match *self {
            TransformPair::Gaussian { t } => (-t * sigma * sigma).exp(),
            TransformPair::Resolvent { lambda0 } => 1.0 / (lambda0 + sigma * sigma),
        }
    }

    /// Λ with ∫_{|y|>Λ} |f̂| below `tol`.
    pub fn window(&self, tol: f64) -> f64 {
        match *self {
            TransformPair::Gaussian { t } => 2.0 * (t * (PI.sqrt() / tol).ln().max(1.0)).sqrt(),
            TransformPair::Resolvent { lambda0 } => (2.0 * PI / (lambda0 * tol)).ln().max(1.0) / lambda0.sqrt(),
        }
    }

    /// X with |f(σ)| below `tol` for σ > X.
    pub fn spatial_cutoff(&self, tol: f64) -> f64 {
        match *self {
            TransformPair::Gaussian { t } => ((1.0 / tol).ln().max(0.0) / t).sqrt(),
            TransformPair::Resolvent { .. } => (1.0 / tol).sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub values: Vec<f64>,
    pub step: f64,
    pub window: f64,
    pub nodes: usize,
    /// Bound on the discarded tail of f̂.
    pub truncation_estimate: f64,
}

/// Largest quadrature node count accepted by [`function_of_sqrt`].
pub const MAX_QUADRATURE_NODES: usize = 2_000_000;

/// (1/2π)∫ f̂(λ) cos(λ√A) f₀ dλ by the trapezoid rule over propagator snapshots.
pub fn function_of_sqrt(sd: &SpectralDecomposition, pair: &TransformPair, f0: &[f64], tol: f64) -> Result<QuadratureResult> {
    pair.validate()?;
    if !(tol > 0.0) {
        return Err(param("tol", "must be positive"));
    }
    let window = pair.window(tol);
    let mu_max = sd.max_eigenvalue().max(0.0).sqrt();
    let step = 0.9 * 2.0 * PI / (mu_max + pair.spatial_cutoff(tol));
    let nodes = (window / step).ceil() as usize;
    if nodes > MAX_QUADRATURE_NODES {
        return Err(LabError::Refused(format!("quadrature needs {nodes} nodes (max {MAX_QUADRATURE_NODES})")));
    }
    let step = window / nodes as f64;
    // symmetric trapezoid on [−Λ, Λ] folded onto [0, Λ]
    let sq: Vec<f64> = sd.values.iter().map(|l| l.max(0.0).sqrt()).collect();
    let mult: Vec<f64> = sq
        .par_iter()
        .map(|&s| {
            let mut acc = CompensatedSum::default();
            for k in 0..=nodes {
                let y = k as f64 * step;
                let w = if k == 0 || k == nodes { 1.0 } else { 2.0 };
                acc.add(w * pair.fhat(y) * (y * s).cos());
            }
            acc.value() * step / (2.0 * PI)
        })
        .collect();
    let mut c = sd.coefficients(f0);
    for (cj, m) in c.iter_mut().zip(&mult) {
        *cj *= m;
    }
    Ok(QuadratureResult { values: sd.synthesize(&c), step, window, nodes: nodes + 1, truncation_estimate: tol })
}

/// e^{−tA} f₀.
pub fn heat_apply(sd: &SpectralDecomposition, t: f64, f0: &[f64]) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(param("t", "heat time must be positive"));
    }
    Ok(sd.apply_fn(f0, |l| (-t * l).exp()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventResult {
    pub values: Vec<f64>,
    pub warning: Option<String>,
}

/// (A − λ)⁻¹ f₀ by a tridiagonal solve of (S − λM) u = M f₀.
pub fn resolvent_apply(op: &DiscreteOperator, lambda: f64, f0: &[f64]) -> Result<ResolventResult> {
    let n = op.len();
    if f0.len() != n {
        return Err(LabError::Input("right-hand side must be sampled at the interior nodes".into()));
    }
    let gap = op.eigenvalues()?.iter().map(|l| (l - lambda).abs()).fold(f64::INFINITY, f64::min);
    let warning = (gap < 1e-8).then(|| format!("λ = {lambda} lies within {gap:.2e} of the truncated spectrum"));
    let mut diag: Vec<f64> = (0..n).map(|i| op.stiff_diag[i] - lambda * op.mass[i]).collect();
    let mut rhs: Vec<f64> = (0..n).map(|i| f0[i] * op.mass[i]).collect();
    for i in 1..n {
        let m = op.stiff_off[i - 1] / diag[i - 1];
        diag[i] -= m * op.stiff_off[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    if diag.iter().any(|d| *d == 0.0 || !d.is_finite()) {
        return Err(LabError::Numerical(format!("resolvent solve broke down at λ = {lambda}")));
    }
    let mut u = vec![0.0; n];
    for i in (0..n).rev() {
        let upper = if i + 1 < n { op.stiff_off[i] * u[i + 1] } else { 0.0 };
        u[i] = (rhs[i] - upper) / diag[i];
    }
    Ok(ResolventResult { values: u, warning })
}

/// ‖g(A)‖ on L²_β: largest singular value of D Q g(Λ) Qᵀ D⁻¹, D = diag √β, Q = M^{½}V.
pub fn weighted_opnorm(sd: &SpectralDecomposition, beta: &[f64], g: impl Fn(f64) -> f64) -> Result<f64> {
    let n = sd.len();
    if beta.len() != n || beta.iter().any(|b| !(*b > 0.0)) {
        return Err(LabError::Input("β must be positive at every interior node".into()));
    }
    let mut q = sd.vectors.clone();
    for (i, m) in sd.mass.iter().enumerate() {
        q.row_mut(i).scale_mut(m.sqrt());
    }
    let mut left = q.clone();
    for (i, b) in beta.iter().enumerate() {
        left.row_mut(i).scale_mut(b.sqrt());
    }
    for (j, l) in sd.values.iter().enumerate() {
        left.column_mut(j).scale_mut(g(*l));
    }
    let mut right = q;
    for (i, b) in beta.iter().enumerate() {
        right.row_mut(i).scale_mut(1.0 / b.sqrt());
    }
    let t = left * right.transpose();
    let sv = t.singular_values();
    Ok(sv.max())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpnormGrowth {
    pub s: Vec<f64>,
    pub norms: Vec<f64>,
    pub fit: LineFit,
    /// ln ‖cos(s√A)‖ ≤ ln C + c|s| on every sample.
    pub c_const: f64,
    pub rate: f64,
}

/// ‖cos(s√A)‖_{L²_β} on an s grid with a linear fit of its logarithm.
pub fn weighted_opnorm_growth(op: &DiscreteOperator, sd: &SpectralDecomposition, beta: &DecayProfile, s_grid: &[f64]) -> Result<OpnormGrowth> {
    let x0 = op.grid[0];
    let b: Vec<f64> = op.nodes().iter().map(|x| beta.value(1.0 + x - x0)).collect();
    let norms = s_grid.par_iter().map(|&s| weighted_opnorm(sd, &b, |l| (s * l.max(0.0).sqrt()).cos())).collect::<Result<Vec<_>>>()?;
    let abs_s: Vec<f64> = s_grid.iter().map(|s| s.abs()).collect();
    let ln: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let fit = fit_line(&abs_s, &ln);
    let rate = fit.slope.max(0.0);
    let c_const = abs_s.iter().zip(&ln).map(|(s, l)| l - rate * s).fold(f64::NEG_INFINITY, f64::max).exp();
    Ok(OpnormGrowth { s: s_grid.to_vec(), norms, fit, c_const, rate })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformBoundCheck {
    pub t: f64,
    pub norm: f64,
    /// (C/2π)∫|f̂(λ)| e^{c|λ|} dλ.
    pub bound: f64,
}

/// ‖e^{−tA}‖_{L²_β} against the weighted L¹ norm of the Gaussian transform.
pub fn gaussian_transform_bound(
    op: &DiscreteOperator,
    sd: &SpectralDecomposition,
    beta: &DecayProfile,
    growth: &OpnormGrowth,
    ts: &[f64],
) -> Result<Vec<TransformBoundCheck>> {
    let x0 = op.grid[0];
    let b: Vec<f64> = op.nodes().iter().map(|x| beta.value(1.0 + x - x0)).collect();
    ts.iter()
        .map(|&t| {
            let norm = weighted_opnorm(sd, &b, |l| (-t * l).exp())?;
            let c = growth.rate;
            let (ys, ws) = crate::numerics::quad::composite_gauss(0.0, 2.0 * (t * 40.0).sqrt() + 4.0 * c * t, 64, 16);
            let integral = 2.0 * ys.iter().zip(&ws).map(|(y, w)| w * (PI / t).sqrt() * (-y * y / (4.0 * t) + c * y).exp()).sum::<f64>();
            Ok(TransformBoundCheck { t, norm, bound: growth.c_const * integral / (2.0 * PI) })
        })
        .collect()
}
