//! Warped-product ends dx² + φ(x)² g_Y over a flat torus Y, their difference
//! norms, curvature, injectivity-radius envelopes and volume bounds.
//!
//! Tensors are handled in the g-orthonormal frame {e_x, φ⁻¹∂_{y_i}}; every
//! component is a function of x only and is carried as a jet of ln φ.

use crate::decay::DecayProfile;
use crate::error::{LabError, Result};
use crate::numerics::fit::{geometric_grid, tail_growth, TailFit};
use crate::numerics::jet::Jet;
use crate::numerics::quad::composite_gauss;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Highest difference order supported by the jet engine.
pub const K_MAX: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarpBase {
    /// φ = e^{−x}
    Cusp,
    /// φ ≡ 1
    Cylinder,
}

/// Additive perturbation ε·η(1+x) inside ln φ = base + ln(1 + Σ ε η).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpPerturbation {
    pub eps: f64,
    pub envelope: DecayProfile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpedMetric {
    pub base: WarpBase,
    #[serde(default)]
    pub perturbations: Vec<WarpPerturbation>,
    /// Dimension n of the flat torus cross-section.
    pub fiber_dim: usize,
    /// Shortest closed geodesic of Y.
    pub systole: f64,
    /// Injectivity-radius floor on the core.
    pub core_floor: f64,
}

impl WarpedMetric {
    pub fn cusp(fiber_dim: usize) -> Self {
        WarpedMetric { base: WarpBase::Cusp, perturbations: vec![], fiber_dim, systole: 1.0, core_floor: 1.0 }
    }

    pub fn cylinder(fiber_dim: usize) -> Self {
        WarpedMetric { base: WarpBase::Cylinder, perturbations: vec![], fiber_dim, systole: 2.0 * PI, core_floor: 1.0 }
    }

    pub fn perturbed(mut self, eps: f64, envelope: DecayProfile) -> Self {
        self.perturbations.push(WarpPerturbation { eps, envelope });
        self
    }

    /// Dimension of the manifold (cross-section plus radial direction).
    pub fn dim(&self) -> usize {
        self.fiber_dim + 1
    }

    fn base_jet(&self, x: f64, order: usize) -> Jet {
        match self.base {
            WarpBase::Cusp => Jet::variable(x, order).scale(-1.0),
            WarpBase::Cylinder => Jet::constant(0.0, order),
        }
    }

    /// Σ ε η(1+x) as a jet.
    fn perturbation_sum(&self, x: f64, order: usize) -> Jet {
        let mut s = Jet::constant(0.0, order);
        for p in &self.perturbations {
            s = &s + &p.envelope.jet(1.0 + x, order).scale(p.eps);
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.fiber_dim == 0 {
            return Err(crate::error::param("fiber_dim", "cross-section dimension must be at least 1"));
        }
        if !(self.systole > 0.0) || !(self.core_floor > 0.0) {
            return Err(crate::error::param("systole", "systole and core floor must be positive"));
        }
        for p in &self.perturbations {
            p.envelope.validate()?;
            if p.eps <= -1.0 {
                return Err(crate::error::param("eps", "perturbation would make φ vanish"));
            }
        }
        Ok(())
    }

    /// ln φ as a jet of the given order.
    pub fn ln_phi_jet(&self, x: f64, order: usize) -> Jet {
        &self.base_jet(x, order) + &self.perturbation_sum(x, order).ln_1p()
    }

    pub fn phi(&self, x: f64) -> f64 {
        self.ln_phi_jet(x, 0).value().exp()
    }

    /// Sectional curvatures (radial planes −φ''/φ, tangential planes −(φ'/φ)²).
    pub fn sectional_curvatures(&self, x: f64) -> (f64, f64) {
        let l = self.ln_phi_jet(x, 2);
        let (l1, l2) = (l.deriv(1), l.deriv(2));
        (-(l2 + l1 * l1), -l1 * l1)
    }

    /// Volume density φ(x)ⁿ (per unit cross-section volume).
    pub fn ln_volume_density(&self, x: f64) -> f64 {
        self.fiber_dim as f64 * self.ln_phi_jet(x, 0).value()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricPair {
    pub g: WarpedMetric,
    pub h: WarpedMetric,
}

impl MetricPair {
    pub fn new(g: WarpedMetric, h: WarpedMetric) -> Result<Self> {
        g.validate()?;
        h.validate()?;
        if g.fiber_dim != h.fiber_dim || (g.systole - h.systole).abs() > 0.0 {
            return Err(LabError::Input("metrics in a pair must share the cross-section".into()));
        }
        Ok(MetricPair { g, h })
    }

    pub fn reversed(&self) -> MetricPair {
        MetricPair { g: self.h.clone(), h: self.g.clone() }
    }

    /// ln ψ − ln φ, computed so that equal bases cancel exactly.
    fn delta_ln(&self, x: f64, order: usize) -> Jet {
        let base = if self.g.base == self.h.base { Jet::constant(0.0, order) } else { &self.h.base_jet(x, order) - &self.g.base_jet(x, order) };
        let sh = self.h.perturbation_sum(x, order).ln_1p();
        let sg = self.g.perturbation_sum(x, order).ln_1p();
        &base + &(&sh - &sg)
    }

    /// Eigenvalues of h relative to g at x: radial 1, tangential (ψ/φ)².
    pub fn relative_eigenvalues(&self, x: f64) -> (f64, f64) {
        let e = self.delta_ln(x, 0).scale(2.0).exp().value();
        (e.min(1.0), e.max(1.0))
    }
}

/// Covariant tensor with all indices in the g-orthonormal frame (index 0 = e_x).
#[derive(Clone, Debug)]
struct FrameTensor {
    dim: usize,
    rank: usize,
    comps: Vec<Jet>,
}

impl FrameTensor {
    fn zeros(dim: usize, rank: usize, order: usize) -> Self {
        FrameTensor { dim, rank, comps: vec![Jet::constant(0.0, order); dim.pow(rank as u32)] }
    }

    fn index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    fn set(&mut self, idx: &[usize], v: Jet) {
        let k = self.index(idx);
        self.comps[k] = v;
    }

    fn unravel(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.rank];
        for slot in (0..self.rank).rev() {
            idx[slot] = k % self.dim;
            k /= self.dim;
        }
        idx
    }

    /// ∇T with the derivative direction as the new first index; `dl` is (ln φ)'.
    fn covariant_derivative(&self, dl: &Jet) -> FrameTensor {
        let order = self.comps.iter().map(|c| c.order()).min().unwrap_or(0).saturating_sub(1);
        let mut out = FrameTensor::zeros(self.dim, self.rank + 1, order);
        for k in 0..self.comps.len() {
            let a = self.unravel(k);
            // c = 0: only the x-derivative; the frame is parallel along e_x.
            let mut idx0 = vec![0];
            idx0.extend_from_slice(&a);
            let kk = out.index(&idx0);
            out.comps[kk] = self.comps[k].differentiate().truncate(order);
            for c in 1..self.dim {
                // ∇_{e_c} e_c = −ℓ' e_x, ∇_{e_c} e_x = ℓ' e_c
                let mut acc = Jet::constant(0.0, order);
                for m in 0..self.rank {
                    if a[m] == c {
                        let mut b = a.clone();
                        b[m] = 0;
                        acc = &acc + &(&self.comps[self.index(&b)] * dl);
                    } else if a[m] == 0 {
                        let mut b = a.clone();
                        b[m] = c;
                        acc = &acc - &(&self.comps[self.index(&b)] * dl);
                    }
                }
                let mut idx = vec![c];
                idx.extend_from_slice(&a);
                let kk = out.index(&idx);
                out.comps[kk] = acc.truncate(order);
            }
        }
        out
    }

    fn norm(&self) -> f64 {
        self.comps.iter().map(|c| c.value() * c.value()).sum::<f64>().sqrt()
    }
}

fn connection_difference(pair: &MetricPair, x: f64, order: usize) -> (FrameTensor, Jet) {
    let n = pair.g.fiber_dim;
    let lg = pair.g.ln_phi_jet(x, order + 1);
    let lh = pair.h.ln_phi_jet(x, order + 1);
    let dl = pair.delta_ln(x, order + 1);
    let e = dl.scale(2.0).exp_m1();
    let dlg = lg.differentiate();
    let dlh = lh.differentiate();
    let ddl = dl.differentiate();
    let mut d = FrameTensor::zeros(n + 1, 3, order);
    let radial = &ddl + &(&e.truncate(order) * &dlh);
    for i in 1..=n {
        d.set(&[i, i, 0], radial.clone());
        d.set(&[0, i, i], ddl.scale(-1.0));
        d.set(&[i, 0, i], ddl.scale(-1.0));
    }
    (d, dlg)
}

fn metric_difference(pair: &MetricPair, x: f64, order: usize) -> (FrameTensor, Jet) {
    let n = pair.g.fiber_dim;
    let dl = pair.delta_ln(x, order);
    let e = dl.scale(2.0).exp_m1();
    let mut t = FrameTensor::zeros(n + 1, 2, order);
    for i in 1..=n {
        t.set(&[i, i], e.scale(-1.0));
    }
    (t, pair.g.ln_phi_jet(x, order + 1).differentiate())
}

fn check_order(k: usize) -> Result<()> {
    if k > K_MAX {
        return Err(LabError::Capability(format!("difference order {k} exceeds available derivatives (max {K_MAX})")));
    }
    Ok(())
}

/// ᵏ|g−h|_g(x) = |g−h|_g + Σ_{j<k} |(∇^g)^j(∇^g−∇^h)|_g at every grid point.
pub fn knorm_difference(pair: &MetricPair, k: usize, xs: &[f64]) -> Result<Vec<f64>> {
    check_order(k)?;
    let n = pair.g.fiber_dim as f64;
    Ok(xs
        .iter()
        .map(|&x| {
            let e = pair.delta_ln(x, 0).scale(2.0).exp_m1().value();
            let mut total = n.sqrt() * e.abs();
            if k > 0 {
                let (mut d, dlg) = connection_difference(pair, x, k - 1);
                total += d.norm();
                for _ in 1..k {
                    d = d.covariant_derivative(&dlg);
                    total += d.norm();
                }
            }
            total
        })
        .collect())
}

/// Σ_{i=0}^k |(∇^g)^i(g−h)|_g at every grid point.
pub fn gradient_sum_difference(pair: &MetricPair, k: usize, xs: &[f64]) -> Result<Vec<f64>> {
    check_order(k)?;
    Ok(xs
        .iter()
        .map(|&x| {
            let (mut t, dlg) = metric_difference(pair, x, k);
            let mut total = t.norm();
            for _ in 0..k {
                t = t.covariant_derivative(&dlg);
                total += t.norm();
            }
            total
        })
        .collect())
}

/// Default grid for equivalence audits: 0 plus a geometric grid on [0.01, x_max].
pub fn equivalence_grid(x_max: f64, points: usize) -> Vec<f64> {
    let mut xs = vec![0.0];
    xs.extend(geometric_grid(0.01, x_max, points));
    xs
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundedRatio {
    /// sup of sample / β(1+x) over the grid.
    pub c: f64,
    pub tail: TailFit,
    pub pass: bool,
}

/// sup of samples/β(1+x) with a tail-growth verdict.
pub fn beta_bounded(samples: &[f64], beta: &DecayProfile, xs: &[f64]) -> BoundedRatio {
    let ln_r: Vec<f64> = samples.iter().zip(xs).map(|(s, x)| s.ln() - beta.ln_value(1.0 + x)).collect();
    let c = ln_r.iter().cloned().fold(f64::NEG_INFINITY, f64::max).exp();
    let tail = tail_growth(xs, &ln_r);
    let c = if c.is_nan() { f64::INFINITY } else { c };
    BoundedRatio { c, tail, pass: c.is_finite() && tail.bounded }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceVerdict {
    pub forward: BoundedRatio,
    pub reverse: BoundedRatio,
    pub pass: bool,
    /// Forward and reversed pair agree.
    pub consistent: bool,
}

/// β-equivalence g ∼ᵏ_β h on the grid, run in both directions.
pub fn check_beta_equivalence(pair: &MetricPair, k: usize, beta: &DecayProfile, xs: &[f64]) -> Result<EquivalenceVerdict> {
    let fwd = beta_bounded(&knorm_difference(pair, k, xs)?, beta, xs);
    let rev = beta_bounded(&knorm_difference(&pair.reversed(), k, xs)?, beta, xs);
    Ok(EquivalenceVerdict { pass: fwd.pass, consistent: fwd.pass == rev.pass, forward: fwd, reverse: rev })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationCheck {
    pub connection: BoundedRatio,
    pub gradients: BoundedRatio,
    pub agree: bool,
}

/// Compares the connection-difference and the gradient-sum characterizations.
pub fn nabla_characterization_check(pair: &MetricPair, k: usize, beta: &DecayProfile, xs: &[f64]) -> Result<CharacterizationCheck> {
    let connection = beta_bounded(&knorm_difference(pair, k, xs)?, beta, xs);
    let gradients = beta_bounded(&gradient_sum_difference(pair, k, xs)?, beta, xs);
    Ok(CharacterizationCheck { agree: connection.pass == gradients.pass, connection, gradients })
}

/// Curvature (0,4) tensor of `pair.h` expressed in the g-frame (pass g = h for R^g).
fn curvature_tensor(pair: &MetricPair, x: f64, order: usize) -> FrameTensor {
    let n = pair.g.fiber_dim;
    let lh = pair.h.ln_phi_jet(x, order + 2);
    let l1 = lh.differentiate();
    let l2 = l1.differentiate();
    let sq = (&l1 * &l1).truncate(order);
    let k_rad = (&l2 + &sq).scale(-1.0);
    let k_tan = sq.scale(-1.0);
    let s2 = pair.delta_ln(x, order).scale(2.0).exp();
    let one = Jet::constant(1.0, order);
    let scale2 = |a: usize| if a == 0 { one.clone() } else { s2.clone() };
    let mut t = FrameTensor::zeros(n + 1, 4, order);
    for a in 0..=n {
        for b in 0..=n {
            if a == b || (a > 0 && b > 0 && n < 2) {
                continue;
            }
            let kab = if a == 0 || b == 0 { &k_rad } else { &k_tan };
            t.set(&[a, b, b, a], &scale2(b) * kab);
            t.set(&[a, b, a, b], (&scale2(a) * kab).scale(-1.0));
        }
    }
    t
}

fn curvature_difference_samples(pair: &MetricPair, derivs: usize, xs: &[f64]) -> Vec<f64> {
    let same_g = MetricPair { g: pair.g.clone(), h: pair.g.clone() };
    xs.iter()
        .map(|&x| {
            let rg = curvature_tensor(&same_g, x, derivs);
            let rh = curvature_tensor(pair, x, derivs);
            let mut diff = FrameTensor { dim: rg.dim, rank: 4, comps: rg.comps.iter().zip(&rh.comps).map(|(a, b)| a - b).collect() };
            let dlg = pair.g.ln_phi_jet(x, derivs + 1).differentiate();
            let mut total = diff.norm();
            for _ in 0..derivs {
                diff = diff.covariant_derivative(&dlg);
                total += diff.norm();
            }
            total
        })
        .collect()
}

/// Σ_{i ≤ order} |∇^i R|_g of a single metric at each grid point.
pub fn curvature_norms(metric: &WarpedMetric, order: usize, xs: &[f64]) -> Vec<f64> {
    let pair = MetricPair { g: metric.clone(), h: metric.clone() };
    xs.iter()
        .map(|&x| {
            let mut r = curvature_tensor(&pair, x, order);
            let dl = metric.ln_phi_jet(x, order + 1).differentiate();
            let mut total = r.norm();
            for _ in 0..order {
                r = r.covariant_derivative(&dl);
                total += r.norm();
            }
            total
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub difference: BoundedRatio,
    pub g_bounded: bool,
    pub h_bounded: bool,
    /// Bounded curvature of order k−2 holds for h iff for g.
    pub corollary_agrees: bool,
    pub pass: bool,
}

/// Decay of Σ_{i≤k−2}|(∇^g)^i(R^g−R^h)|_g against β and the bounded-curvature transfer.
pub fn curvature_difference_decay(pair: &MetricPair, k: usize, beta: &DecayProfile, xs: &[f64]) -> Result<CurvatureReport> {
    if k < 2 {
        return Err(LabError::Capability("curvature decay needs difference order k ≥ 2".into()));
    }
    check_order(k)?;
    let derivs = k - 2;
    let difference = beta_bounded(&curvature_difference_samples(pair, derivs, xs), beta, xs);
    let bounded = |m: &WarpedMetric| {
        let s = curvature_norms(m, derivs, xs);
        let ln: Vec<f64> = s.iter().map(|v| v.ln()).collect();
        s.iter().all(|v| v.is_finite()) && tail_growth(xs, &ln).bounded
    };
    let g_bounded = bounded(&pair.g);
    let h_bounded = bounded(&pair.h);
    Ok(CurvatureReport { pass: difference.pass, corollary_agrees: g_bounded == h_bounded, difference, g_bounded, h_bounded })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectivityModel {
    /// Sectional curvature bound |K_M| ≤ K.
    pub k_bound: f64,
    /// π/(12√K); `None` for flat ends where the cap is disabled.
    pub cap: Option<f64>,
    pub base_point: f64,
    pub metric: WarpedMetric,
}

impl InjectivityModel {
    /// ln ĩ(x) with ĩ = min(cap, core floor, φ(x)·ℓ_min/2).
    pub fn ln_itilde(&self, x: f64) -> f64 {
        let m = &self.metric;
        let mut v = m.core_floor.ln().min(m.ln_phi_jet(x, 0).value() + (0.5 * m.systole).ln());
        if let Some(c) = self.cap {
            v = v.min(c.ln());
        }
        v
    }

    pub fn itilde(&self, x: f64) -> f64 {
        self.ln_itilde(x).exp()
    }
}

/// Curvature bound from samples on [0, x_max] and the resulting ĩ model.
pub fn injectivity_envelope(metric: &WarpedMetric, p: f64) -> Result<InjectivityModel> {
    metric.validate()?;
    let xs = equivalence_grid(1e3, 400);
    let mut k: f64 = 0.0;
    for &x in &xs {
        let (a, b) = metric.sectional_curvatures(x);
        k = k.max(a.abs()).max(if metric.fiber_dim >= 2 { b.abs() } else { 0.0 });
    }
    if k < 1e-14 {
        k = 0.0;
    }
    let cap = (k > 0.0).then(|| PI / (12.0 * k.sqrt()));
    Ok(InjectivityModel { k_bound: k, cap, base_point: p, metric: metric.clone() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityAudit {
    /// Largest constant for which the inequality holds on every sample.
    pub c: f64,
    pub pass: bool,
}

/// ĩ(x) ≥ C ĩ(p)ⁿ e^{−(n−1)√K d(x,p)} on the samples, n = dim M.
pub fn audit_injectivity_decay(model: &InjectivityModel, xs: &[f64]) -> InequalityAudit {
    let n = model.metric.dim() as f64;
    let p = model.base_point;
    let lp = model.ln_itilde(p);
    let sk = model.k_bound.sqrt();
    let ln_ratio: Vec<f64> = xs.iter().map(|&x| model.ln_itilde(x) - n * lp + (n - 1.0) * sk * (x - p).abs()).collect();
    let min = ln_ratio.iter().cloned().fold(f64::INFINITY, f64::min);
    let neg: Vec<f64> = ln_ratio.iter().map(|v| -v).collect();
    let tail = tail_growth(xs, &neg);
    InequalityAudit { c: min.exp(), pass: min.is_finite() && tail.bounded }
}

/// ĩ(y) ≥ C ĩ(x) e^{−((n−1)π/12)·d(x,y)/ĩ(x)} over all sample pairs.
pub fn audit_injectivity_spread(model: &InjectivityModel, xs: &[f64]) -> InequalityAudit {
    let n = model.metric.dim() as f64;
    let li: Vec<f64> = xs.iter().map(|&x| model.ln_itilde(x)).collect();
    let mut min = f64::INFINITY;
    for (i, x) in xs.iter().enumerate() {
        let ix = li[i].exp();
        for (j, y) in xs.iter().enumerate() {
            let r = li[j] - li[i] + (n - 1.0) * PI / 12.0 * (x - y).abs() / ix;
            min = min.min(r);
        }
    }
    InequalityAudit { c: min.exp(), pass: min.is_finite() && min.exp() > 0.0 }
}

fn gamma_half(n: usize) -> f64 {
    // Γ(n/2)
    let (mut g, mut s) = if n.is_multiple_of(2) { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    while s < n as f64 / 2.0 - 1e-12 {
        g *= s;
        s += 1.0;
    }
    g
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeBounds {
    /// `None` when r > π/√K, where the comparison function changes sign.
    pub lower: Option<f64>,
    pub upper: f64,
}

/// Comparison-geometry volume bounds of a geodesic r-ball in dimension n with |K_M| ≤ K.
pub fn gunther_bishop_volume(r: f64, k: f64, n: usize) -> Result<VolumeBounds> {
    if !(r > 0.0) || !(k >= 0.0) || n < 1 {
        return Err(LabError::Input(format!("need r > 0, K ≥ 0, n ≥ 1 (got r={r}, K={k}, n={n})")));
    }
    let omega = 2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n);
    let sk = k.sqrt();
    let (ts, ws) = composite_gauss(0.0, r, 64, 16);
    let p = (n - 1) as i32;
    let integrate = |f: &dyn Fn(f64) -> f64| ts.iter().zip(&ws).map(|(t, w)| w * f(*t).powi(p)).sum::<f64>();
    let upper = omega * if sk == 0.0 { integrate(&|t| t) } else { integrate(&|t| (t * sk).sinh() / sk) };
    let lower = if sk == 0.0 {
        Some(omega * integrate(&|t| t))
    } else if r * sk <= PI {
        Some(omega * integrate(&|t| (t * sk).sin() / sk))
    } else {
        None
    };
    Ok(VolumeBounds { lower, upper })
}

/// Three metrics on a shared end with a common decay profile for the axiom audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpedTriple {
    pub metrics: [WarpedMetric; 3],
    pub beta: DecayProfile,
}

impl WarpedTriple {
    /// Random triple: shared base and fiber, perturbation exponents drawn from a
    /// separated set so no envelope sits on the β threshold.
    pub fn random<R: rand::Rng>(rng: &mut R) -> Result<Self> {
        let fiber = rng.gen_range(1..=3);
        let cusp = rng.gen_bool(0.5);
        let mut metrics = Vec::with_capacity(3);
        for _ in 0..3 {
            let base = if cusp { WarpedMetric::cusp(fiber) } else { WarpedMetric::cylinder(fiber) };
            let m = match rng.gen_range(0..4) {
                0 => base,
                1 => base.perturbed(rng.gen_range(-0.3..0.3), DecayProfile::power_law([1.0, 1.5, 2.0, 3.0, 4.0][rng.gen_range(0..5)])?),
                2 => base.perturbed(rng.gen_range(-0.3..0.3), DecayProfile::exponential([0.5, 1.0, 2.0][rng.gen_range(0..3)])?),
                _ => base
                    .perturbed(rng.gen_range(-0.2..0.2), DecayProfile::power_law([1.0, 2.0][rng.gen_range(0..2)])?)
                    .perturbed(rng.gen_range(-0.2..0.2), DecayProfile::exponential(1.0)?),
            };
            metrics.push(m);
        }
        let beta = DecayProfile::power_law([1.25, 1.75, 2.5, 3.5][rng.gen_range(0..4)])?;
        let metrics: [WarpedMetric; 3] = metrics.try_into().expect("three metrics");
        Ok(WarpedTriple { metrics, beta })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub reflexive: bool,
    pub symmetric: bool,
    pub transitive: bool,
    /// Connection and gradient characterizations agree on every ordered pair.
    pub characterization_agree: bool,
    /// Verdicts for (0,1), (1,0), (1,2), (2,1), (0,2), (2,0).
    pub verdicts: [bool; 6],
}

impl AxiomReport {
    pub fn all_hold(&self) -> bool {
        self.reflexive && self.symmetric && self.transitive && self.characterization_agree
    }
}

/// Reflexivity, symmetry, transitivity and characterization agreement on one triple.
pub fn equivalence_axioms(triple: &WarpedTriple, k: usize, xs: &[f64]) -> Result<AxiomReport> {
    let m = &triple.metrics;
    let beta = &triple.beta;
    let mut reflexive = true;
    for g in m {
        reflexive &= check_beta_equivalence(&MetricPair::new(g.clone(), g.clone())?, k, beta, xs)?.pass;
    }
    let order = [(0, 1), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0)];
    let mut verdicts = [false; 6];
    let mut characterization_agree = true;
    for (slot, (i, j)) in order.iter().enumerate() {
        let pair = MetricPair::new(m[*i].clone(), m[*j].clone())?;
        verdicts[slot] = check_beta_equivalence(&pair, k, beta, xs)?.pass;
        characterization_agree &= nabla_characterization_check(&pair, k, beta, xs)?.agree;
    }
    let symmetric = verdicts[0] == verdicts[1] && verdicts[2] == verdicts[3] && verdicts[4] == verdicts[5];
    let (gh, hk, gk) = (verdicts[0], verdicts[2], verdicts[4]);
    // any two of the three relations force the third
    let transitive = !(gh && hk && !gk) && !(gh && gk && !hk) && !(hk && gk && !gh);
    Ok(AxiomReport { reflexive, symmetric, transitive, characterization_agree, verdicts })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x_grid() -> Vec<f64> {
        equivalence_grid(1e3, 300)
    }

    #[test]
    fn identical_metrics_have_zero_difference() {
        let g = WarpedMetric::cusp(2).perturbed(0.3, DecayProfile::power_law(2.0).unwrap());
        let pair = MetricPair::new(g.clone(), g).unwrap();
        let xs = x_grid();
        assert!(knorm_difference(&pair, 3, &xs).unwrap().iter().all(|v| *v == 0.0));
        let v = check_beta_equivalence(&pair, 3, &DecayProfile::power_law(5.0).unwrap(), &xs).unwrap();
        assert!(v.pass && v.forward.c == 0.0);
    }

    #[test]
    fn zeroth_order_closed_form() {
        let eps = 0.2;
        let n = 2;
        let g = WarpedMetric::cusp(n);
        let h = WarpedMetric::cusp(n).perturbed(eps, DecayProfile::exponential(1.0).unwrap());
        let pair = MetricPair::new(g, h).unwrap();
        let xs = [0.0, 0.5, 3.0, 10.0];
        let v = knorm_difference(&pair, 0, &xs).unwrap();
        for (x, got) in xs.iter().zip(v) {
            // envelope evaluated at 1+x
            let e = (-(1.0 + x)).exp();
            let want = (n as f64).sqrt() * (eps * e * (2.0 + eps * e)).abs();
            assert!((got - want).abs() < 1e-13 * want);
        }
    }

    #[test]
    fn cusp_power_law_envelope_equivalence() {
        let g = WarpedMetric::cusp(1);
        let h = WarpedMetric::cusp(1).perturbed(0.5, DecayProfile::power_law(2.0).unwrap());
        let pair = MetricPair::new(g, h).unwrap();
        let xs = x_grid();
        let ok = check_beta_equivalence(&pair, 2, &DecayProfile::power_law(2.0).unwrap(), &xs).unwrap();
        assert!(ok.pass && ok.consistent && ok.forward.c.is_finite());
        let bad = check_beta_equivalence(&pair, 2, &DecayProfile::power_law(3.0).unwrap(), &xs).unwrap();
        assert!(!bad.pass && bad.consistent);
    }

    #[test]
    fn characterizations_agree_including_constant_shift() {
        let xs = x_grid();
        let beta = DecayProfile::power_law(2.0).unwrap();
        let decaying = MetricPair::new(WarpedMetric::cusp(2), WarpedMetric::cusp(2).perturbed(0.3, DecayProfile::power_law(2.5).unwrap())).unwrap();
        let c = nabla_characterization_check(&decaying, 1, &beta, &xs).unwrap();
        assert!(c.agree && c.connection.pass && c.gradients.pass);
        let shifted = MetricPair::new(WarpedMetric::cusp(2), WarpedMetric::cusp(2).perturbed(0.3, DecayProfile::exponential(0.0).unwrap())).unwrap();
        let c = nabla_characterization_check(&shifted, 1, &beta, &xs).unwrap();
        assert!(c.agree && !c.connection.pass && !c.gradients.pass);
    }

    #[test]
    fn random_triples_obey_axioms() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let xs = equivalence_grid(1e3, 120);
        for _ in 0..4 {
            let t = WarpedTriple::random(&mut rng).unwrap();
            let r = equivalence_axioms(&t, 2, &xs).unwrap();
            assert!(r.all_hold(), "{t:?} {r:?}");
        }
    }

    #[test]
    fn curvature_values() {
        let (a, b) = WarpedMetric::cusp(2).sectional_curvatures(3.7);
        assert!((a + 1.0).abs() < 1e-14 && (b + 1.0).abs() < 1e-14);
        let (a, b) = WarpedMetric::cylinder(2).sectional_curvatures(3.7);
        assert_eq!((a, b), (0.0, -0.0));
        let g = WarpedMetric::cusp(2);
        let pair = MetricPair::new(g.clone(), g).unwrap();
        let r = curvature_difference_decay(&pair, 2, &DecayProfile::power_law(1.0).unwrap(), &x_grid()).unwrap();
        assert!(r.pass && r.difference.c == 0.0 && r.corollary_agrees && r.g_bounded);
        assert!(curvature_difference_decay(&pair, 1, &DecayProfile::power_law(1.0).unwrap(), &x_grid()).is_err());
    }

    #[test]
    fn curvature_difference_decays_with_perturbation() {
        let pair = MetricPair::new(WarpedMetric::cusp(2), WarpedMetric::cusp(2).perturbed(0.4, DecayProfile::power_law(2.0).unwrap())).unwrap();
        let r = curvature_difference_decay(&pair, 3, &DecayProfile::power_law(2.0).unwrap(), &x_grid()).unwrap();
        assert!(r.pass && r.corollary_agrees && r.g_bounded && r.h_bounded);
    }

    #[test]
    fn injectivity_models() {
        let cusp = injectivity_envelope(&WarpedMetric::cusp(1), 0.0).unwrap();
        assert!((cusp.k_bound - 1.0).abs() < 1e-12);
        assert!((cusp.itilde(0.0) - PI / 12.0).abs() < 1e-15);
        assert!((cusp.ln_itilde(20.0) - (-20.0 + 0.5f64.ln())).abs() < 1e-12);
        let xs = equivalence_grid(200.0, 200);
        assert!(audit_injectivity_decay(&cusp, &xs).pass);
        assert!(audit_injectivity_spread(&cusp, &xs[..80]).pass);
        let cyl = injectivity_envelope(&WarpedMetric::cylinder(1), 0.0).unwrap();
        assert!(cyl.cap.is_none() && cyl.k_bound == 0.0);
        assert!(audit_injectivity_decay(&cyl, &xs).pass);
    }

    #[test]
    fn volume_bounds() {
        let v = gunther_bishop_volume(PI / 2.0, 1.0, 2).unwrap();
        assert!((v.lower.unwrap() - 2.0 * PI).abs() < 1e-12);
        let flat = gunther_bishop_volume(0.7, 0.0, 2).unwrap();
        assert!((flat.upper - PI * 0.49).abs() < 1e-12 && (flat.lower.unwrap() - PI * 0.49).abs() < 1e-12);
        let tiny = gunther_bishop_volume(0.7, 1e-12, 2).unwrap();
        assert!((tiny.upper - PI * 0.49).abs() < 1e-9);
        assert!(gunther_bishop_volume(4.0, 1.0, 3).unwrap().lower.is_none());
        assert!((gamma_half(5) - 0.75 * PI.sqrt()).abs() < 1e-14);
    }
}
