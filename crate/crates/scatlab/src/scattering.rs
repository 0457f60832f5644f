//! Mode-0 cusp scattering in log coordinates x = ln u, where the free model is
//! −d²/dx² + n²/4 on the half-line with a Dirichlet condition at x = 0.

use crate::error::{param, LabError, Result};
use crate::funcalc::SpectralDecomposition;
use crate::numerics::fit::{fit_line, geometric_grid};
use crate::numerics::ode::rk4;
use crate::numerics::quad::{composite_gauss, CompensatedSum};
use crate::operators::{
    build_mode_operator, perturb_operator, BaseCoefficients, Coefficients, DiscreteOperator, EndModel, Formulation, GridSpec, Perturbation,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// e(u,λ) = u^{n/2}(u^{iλ} − u^{−iλ}).
pub fn generalized_eigenfunction(n: usize, u: f64, lambda: f64) -> Complex64 {
    let a = u.powf(n as f64 / 2.0);
    Complex64::new(0.0, 2.0 * a * (lambda * u.ln()).sin())
}

/// Spectral parameter n²/4 + λ².
pub fn spectral_parameter(n: usize, lambda: f64) -> f64 {
    (n * n) as f64 / 4.0 + lambda * lambda
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CuspFreeModel {
    pub n: usize,
    pub x_max: f64,
    /// Interior x nodes.
    pub points: usize,
    pub lambda_max: f64,
    pub lambda_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformResult {
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    /// Fraction of ‖Ff‖² in the top 5% of the λ window.
    pub tail_energy: f64,
    pub warning: Option<String>,
}

impl CuspFreeModel {
    pub fn new(n: usize, x_max: f64, points: usize, lambda_max: f64, lambda_points: usize) -> Result<Self> {
        if n == 0 || !(x_max > 0.0) || points < 4 || !(lambda_max > 0.0) || lambda_points < 4 {
            return Err(param("model", "need n ≥ 1, x_max > 0, λ_max > 0 and at least 4 nodes in x and λ"));
        }
        Ok(CuspFreeModel { n, x_max, points, lambda_max, lambda_points })
    }

    pub fn dx(&self) -> f64 {
        self.x_max / (self.points + 1) as f64
    }

    pub fn x_nodes(&self) -> Vec<f64> {
        (1..=self.points).map(|j| j as f64 * self.dx()).collect()
    }

    pub fn lambda_nodes(&self) -> Vec<f64> {
        let m = self.lambda_points - 1;
        (0..=m).map(|k| self.lambda_max * k as f64 / m as f64).collect()
    }

    fn lambda_weights(&self) -> Vec<f64> {
        let h = self.lambda_max / (self.lambda_points - 1) as f64;
        (0..self.lambda_points).map(|k| if k == 0 || k + 1 == self.lambda_points { 0.5 * h } else { h }).collect()
    }

    /// Free operator on the truncated half-line.
    pub fn free_operator(&self) -> Result<DiscreteOperator> {
        let end = EndModel::flat_torus_cusp(self.n, 1)?;
        build_mode_operator(&end, 0, &GridSpec::uniform(0.0, self.x_max, self.points), Formulation::LogX)
    }

    /// (Ff)(λ) = √(2/π) ∫ sin(λx) f(x) dx on the λ grid.
    pub fn transform(&self, f: &[f64]) -> Result<TransformResult> {
        if f.len() != self.points {
            return Err(LabError::Input("function must be sampled at the interior x nodes".into()));
        }
        let xs = self.x_nodes();
        let lambdas = self.lambda_nodes();
        let c = (2.0 / PI).sqrt() * self.dx();
        let values: Vec<f64> = lambdas
            .par_iter()
            .map(|&l| {
                let mut s = CompensatedSum::default();
                for (x, v) in xs.iter().zip(f) {
                    s.add((l * x).sin() * v);
                }
                c * s.value()
            })
            .collect();
        let w = self.lambda_weights();
        let total: f64 = values.iter().zip(&w).map(|(v, w)| v * v * w).sum();
        let cut = (0.95 * self.lambda_points as f64) as usize;
        let tail: f64 = values[cut..].iter().zip(&w[cut..]).map(|(v, w)| v * v * w).sum();
        let tail_energy = if total > 0.0 { tail / total } else { 0.0 };
        let warning = (tail_energy > 1e-8).then(|| format!("λ window does not resolve the bandwidth; energy leak estimate {tail_energy:.2e}"));
        Ok(TransformResult { lambdas, values, tail_energy, warning })
    }

    /// f(x) = √(2/π) ∫ sin(λx) F(λ) dλ at the interior x nodes.
    pub fn inverse_transform(&self, big_f: &[f64]) -> Result<Vec<f64>> {
        if big_f.len() != self.lambda_points {
            return Err(LabError::Input("transform must be sampled on the λ grid".into()));
        }
        let lambdas = self.lambda_nodes();
        let w = self.lambda_weights();
        let c = (2.0 / PI).sqrt();
        Ok(self
            .x_nodes()
            .par_iter()
            .map(|&x| {
                let mut s = CompensatedSum::default();
                for ((l, v), w) in lambdas.iter().zip(big_f).zip(&w) {
                    s.add((l * x).sin() * v * w);
                }
                c * s.value()
            })
            .collect())
    }

    /// |‖Ff‖ − ‖f‖| / ‖f‖.
    pub fn parseval_defect(&self, f: &[f64]) -> Result<f64> {
        let t = self.transform(f)?;
        let nf = (f.iter().map(|v| v * v).sum::<f64>() * self.dx()).sqrt();
        let nt = t.values.iter().zip(self.lambda_weights()).map(|(v, w)| v * v * w).sum::<f64>().sqrt();
        Ok((nt - nf).abs() / nf)
    }
}

/// Same transform computed from u-samples φ(u) through e(u,λ) and the measure u^{−(n+1)}du.
pub fn transform_u(n: usize, u: &[f64], phi: &[f64], lambdas: &[f64]) -> Vec<f64> {
    let w = crate::numerics::quad::trapezoid_weights(u);
    lambdas
        .iter()
        .map(|&l| {
            let s: Complex64 = u.iter().zip(phi).zip(&w).map(|((u, p), w)| generalized_eigenfunction(n, *u, l) * (p * u.powf(-(n as f64) - 1.0) * w)).sum();
            (s * Complex64::new(0.0, -1.0)).re / (2.0 * PI).sqrt()
        })
        .collect()
}

/// Gaussian wave packet in λ synthesized through the inverse transform.
pub fn wave_packet(model: &CuspFreeModel, lambda0: f64, sigma: f64) -> Result<Vec<f64>> {
    if !(lambda0 - 3.0 * sigma > 0.0) {
        return Err(param("lambda0", "packet must sit at least 3σ above threshold"));
    }
    let psi: Vec<f64> = model.lambda_nodes().iter().map(|l| (-(l - lambda0).powi(2) / (4.0 * sigma * sigma)).exp()).collect();
    model.inverse_transform(&psi)
}

/// Uniform grid in the spectral parameter on which the Enss projections act.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    pub n: usize,
    pub mu_min: f64,
    pub d_mu: f64,
    pub points: usize,
    /// FFT length after zero padding.
    pub padded: usize,
}

impl SpectralGrid {
    pub fn new(n: usize, mu_min: f64, mu_max: f64, d_mu: f64) -> Result<Self> {
        let threshold = (n * n) as f64 / 4.0;
        if !(mu_min > threshold) || !(mu_max > mu_min) || !(d_mu > 0.0) {
            return Err(param("spectral_grid", "need threshold < μ_min < μ_max and Δμ > 0"));
        }
        let points = ((mu_max - mu_min) / d_mu).round() as usize + 1;
        Ok(SpectralGrid { n, mu_min, d_mu, points, padded: (4 * points).next_power_of_two() })
    }

    pub fn mu(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.mu_min + k as f64 * self.d_mu).collect()
    }

    pub fn lambda(&self) -> Vec<f64> {
        let t = (self.n * self.n) as f64 / 4.0;
        self.mu().iter().map(|m| (m - t).sqrt()).collect()
    }

    /// L²(dμ) representation ψ(μ) = (Ff)(λ)/√(2λ) of a real x-space function.
    pub fn represent(&self, model: &CuspFreeModel, f: &[f64]) -> Vec<Complex64> {
        let xs = model.x_nodes();
        let c = (2.0 / PI).sqrt() * model.dx();
        self.lambda()
            .par_iter()
            .map(|&l| {
                let mut s = CompensatedSum::default();
                for (x, v) in xs.iter().zip(f) {
                    s.add((l * x).sin() * v);
                }
                Complex64::new(c * s.value() / (2.0 * l).sqrt(), 0.0)
            })
            .collect()
    }

    pub fn norm(&self, psi: &[Complex64]) -> f64 {
        (psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.d_mu).sqrt()
    }

    /// Multiplies by e^{−itμ}.
    pub fn evolve(&self, psi: &[Complex64], t: f64) -> Vec<Complex64> {
        psi.iter().zip(self.mu()).map(|(z, m)| z * Complex64::from_polar(1.0, -t * m)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Outgoing,
    Incoming,
}

/// Half-line Fourier multipliers χ± conjugated to the μ grid.
pub struct EnssProjections {
    pub grid: SpectralGrid,
    pub plus: DMatrix<Complex64>,
    pub minus: DMatrix<Complex64>,
}

fn apply_chi(grid: &SpectralGrid, psi: &[Complex64], dir: Direction) -> Vec<Complex64> {
    let n = grid.padded;
    let mut planner = FftPlanner::<f64>::new();
    let inv = planner.plan_fft_inverse(n);
    let fwd = planner.plan_fft_forward(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[..psi.len()].copy_from_slice(psi);
    // buffer index j ↔ s_j = 2πj/(nΔμ), wrapped; s = 0 belongs to the outgoing half
    inv.process(&mut buf);
    for (j, z) in buf.iter_mut().enumerate() {
        let positive = j < n / 2;
        let keep = match dir {
            Direction::Outgoing => positive,
            Direction::Incoming => !positive,
        };
        if !keep {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    fwd.process(&mut buf);
    let scale = 1.0 / n as f64;
    buf[..psi.len()].iter().map(|z| z * scale).collect()
}

impl EnssProjections {
    /// P₊ (s ≥ 0) and P₋ (s < 0) as matrices on the μ grid.
    pub fn new(grid: &SpectralGrid) -> Self {
        let m = grid.points;
        let cols: Vec<(Vec<Complex64>, Vec<Complex64>)> = (0..m)
            .into_par_iter()
            .map(|k| {
                let mut e = vec![Complex64::new(0.0, 0.0); m];
                e[k] = Complex64::new(1.0, 0.0);
                (apply_chi(grid, &e, Direction::Outgoing), apply_chi(grid, &e, Direction::Incoming))
            })
            .collect();
        let plus = DMatrix::from_fn(m, m, |i, j| cols[j].0[i]);
        let minus = DMatrix::from_fn(m, m, |i, j| cols[j].1[i]);
        EnssProjections { grid: grid.clone(), plus, minus }
    }

    pub fn apply(&self, psi: &[Complex64], dir: Direction) -> Vec<Complex64> {
        let v = DVector::from_column_slice(psi);
        let r = match dir {
            Direction::Outgoing => &self.plus * v,
            Direction::Incoming => &self.minus * v,
        };
        r.as_slice().to_vec()
    }

    /// (‖P₊+P₋−I‖, ‖P₊²−P₊‖, ‖P₊−P₊*‖) in the max-entry norm.
    pub fn audit(&self) -> (f64, f64, f64) {
        let m = self.grid.points;
        let id = DMatrix::<Complex64>::identity(m, m);
        let sum = (&self.plus + &self.minus - id).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let idem = (&self.plus * &self.plus - &self.plus).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let sa = (&self.plus - self.plus.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        (sum, idem, sa)
    }

    /// ‖P∓ e^{−itH₀} ψ‖/‖ψ‖ along `ts` (outgoing uses P₋ and t ≥ 0, incoming P₊ and −t).
    pub fn decay_curve(&self, psi: &[Complex64], dir: Direction, ts: &[f64]) -> Vec<f64> {
        let norm = self.grid.norm(psi);
        ts.par_iter()
            .map(|&t| {
                let (tt, p) = match dir {
                    Direction::Outgoing => (t, Direction::Incoming),
                    Direction::Incoming => (-t, Direction::Outgoing),
                };
                self.grid.norm(&self.apply(&self.grid.evolve(psi, tt), p)) / norm
            })
            .collect()
    }
}

/// Gaussian in λ at λ₀ with phase offset e^{∓iμT₀} placing it on the outgoing or incoming side.
pub fn directed_packet(grid: &SpectralGrid, lambda0: f64, sigma: f64, offset: f64, dir: Direction) -> Vec<Complex64> {
    let sign = match dir {
        Direction::Outgoing => -1.0,
        Direction::Incoming => 1.0,
    };
    grid.mu().iter().zip(grid.lambda()).map(|(m, l)| Complex64::from_polar((-(l - lambda0).powi(2) / (4.0 * sigma * sigma)).exp(), sign * offset * m)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveOperatorReport {
    pub times: Vec<f64>,
    /// ‖W_{t_{k+1}}f − W_{t_k}f‖/‖f‖, one per consecutive pair.
    pub cauchy_increments: Vec<f64>,
    pub isometry_defect: f64,
    pub intertwining_defect: f64,
    pub best_time: f64,
}

fn evolve_complex(sd: &SpectralDecomposition, re: &[f64], im: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
    let (cr, ci) = (sd.coefficients(re), sd.coefficients(im));
    let mut nr = cr.clone();
    let mut ni = ci.clone();
    for (j, l) in sd.values.iter().enumerate() {
        let (s, c) = (-t * l).sin_cos();
        nr[j] = cr[j] * c - ci[j] * s;
        ni[j] = cr[j] * s + ci[j] * c;
    }
    (sd.synthesize(&nr), sd.synthesize(&ni))
}

fn cnorm(op: &DiscreteOperator, re: &[f64], im: &[f64]) -> f64 {
    (op.inner(re, re) + op.inner(im, im)).sqrt()
}

/// Diagnostics of W_t = e^{itH}e^{−itH₀} on a packet along the schedule `times`.
pub fn wave_operator(op_free: &DiscreteOperator, op_h: &DiscreteOperator, f: &[f64], times: &[f64]) -> Result<WaveOperatorReport> {
    if times.len() < 2 {
        return Err(param("times", "need at least two times"));
    }
    let s0 = SpectralDecomposition::new(op_free)?;
    let sh = SpectralDecomposition::new(op_h)?;
    let nf = op_free.norm(f);
    let zero = vec![0.0; f.len()];
    let x = op_free.nodes();
    let edge = x[0] + 0.9 * (x[x.len() - 1] - x[0]);
    let mut states = Vec::new();
    for &t in times {
        let (fr, fi) = evolve_complex(&s0, f, &zero, t);
        let outside: f64 =
            x.iter().zip(fr.iter().zip(&fi)).zip(&op_free.mass).filter(|((x, _), _)| **x > edge).map(|((_, (a, b)), m)| (a * a + b * b) * m).sum();
        if outside > 1e-6 * nf * nf {
            return Err(LabError::Refused(format!("packet reaches the truncation boundary by t = {t}; enlarge x_max beyond {:.1}", 2.0 * x[x.len() - 1])));
        }
        states.push(evolve_complex(&sh, &fr, &fi, -t));
    }
    let mut incs = Vec::new();
    for k in 1..states.len() {
        let dr: Vec<f64> = states[k].0.iter().zip(&states[k - 1].0).map(|(a, b)| a - b).collect();
        let di: Vec<f64> = states[k].1.iter().zip(&states[k - 1].1).map(|(a, b)| a - b).collect();
        incs.push(cnorm(op_free, &dr, &di) / nf);
    }
    let best = incs.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i + 1).unwrap();
    let (wr, wi) = &states[best];
    let isometry_defect = (cnorm(op_free, wr, wi) - nf).abs() / nf;
    // H W f − W H₀ f
    let (hr, hi) = (op_h.apply(wr), op_h.apply(wi));
    let h0f = op_free.apply(f);
    let t = times[best];
    let (ar, ai) = evolve_complex(&s0, &h0f, &zero, t);
    let (br, bi) = evolve_complex(&sh, &ar, &ai, -t);
    let dr: Vec<f64> = hr.iter().zip(&br).map(|(a, b)| a - b).collect();
    let di: Vec<f64> = hi.iter().zip(&bi).map(|(a, b)| a - b).collect();
    let intertwining_defect = cnorm(op_free, &dr, &di) / nf;
    Ok(WaveOperatorReport { times: times.to_vec(), cauchy_increments: incs, isometry_defect, intertwining_defect, best_time: t })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringResult {
    pub lambdas: Vec<f64>,
    /// Unwrapped phase shift.
    pub delta: Vec<f64>,
    pub s_re: Vec<f64>,
    pub s_im: Vec<f64>,
    pub x_match: f64,
}

impl ScatteringResult {
    pub fn s(&self, k: usize) -> Complex64 {
        Complex64::new(self.s_re[k], self.s_im[k])
    }

    pub fn max_unitarity_defect(&self) -> f64 {
        (0..self.lambdas.len()).map(|k| (self.s(k).norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

fn coefficient_breakpoints(coef: &Coefficients) -> Result<(Vec<f64>, f64)> {
    match &coef.perturbation {
        None => Ok((vec![], coef.x_min)),
        Some(Perturbation::SquareWell { width, .. }) => Ok((vec![coef.x_min + width], coef.x_min + width)),
        Some(Perturbation::Envelope { beta, eps_p, eps_w, eps_q }) => {
            let amp = eps_p.abs().max(eps_w.abs()).max(eps_q.abs());
            if amp == 0.0 {
                return Ok((vec![], coef.x_min));
            }
            let mut d = 1.0;
            while amp * beta.value(1.0 + d) >= 1e-10 {
                d *= 1.5;
                if d > 1e5 {
                    return Err(LabError::Refused("perturbation envelope does not fall below 1e-10 within 1e5".into()));
                }
            }
            Ok((vec![], coef.x_min + d))
        }
    }
}

/// Phase shift by shooting −(1/w)(p g′)′ + q g = E g from the Dirichlet end and matching to sin(λx + δ).
pub fn smatrix_stationary(coef: &Coefficients, lambdas: &[f64]) -> Result<ScatteringResult> {
    let threshold = match coef.base {
        BaseCoefficients::LogX { n, lambda: 0.0 } => (n * n) as f64 / 4.0,
        BaseCoefficients::Cylinder { mu } => mu,
        _ => return Err(LabError::Input("stationary scattering needs a mode-0 log-coordinate or cylinder model".into())),
    };
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0)) {
        return Err(LabError::Refused(format!("λ = {l} is not above the threshold; no propagating mode")));
    }
    let (breaks, x_match) = coefficient_breakpoints(coef)?;
    let x0 = coef.x_min;
    let raw: Vec<f64> = lambdas
        .par_iter()
        .map(|&lam| {
            let e = threshold + lam * lam;
            let h = (1e-3f64).min(0.02 / lam);
            let rhs = |x: f64, y: [f64; 2]| [y[1] / coef.p(x), (coef.q(x) - e) * coef.w(x) * y[0]];
            let mut y = [0.0, 1.0];
            let mut a = x0;
            let mut stops = breaks.clone();
            stops.push(x_match);
            stops.dedup();
            for b in stops {
                if b > a {
                    let steps = ((b - a) / h).ceil() as usize;
                    y = rk4(rhs, a, b, y, steps.max(1));
                    a = b;
                }
            }
            let (g, dg) = (y[0], y[1] / coef.p(x_match));
            (lam * g).atan2(dg) - lam * (x_match - x0)
        })
        .collect();
    let mut delta = raw.clone();
    for k in 1..delta.len() {
        let mut d = delta[k];
        while d - delta[k - 1] > PI {
            d -= 2.0 * PI;
        }
        while d - delta[k - 1] < -PI {
            d += 2.0 * PI;
        }
        delta[k] = d;
    }
    let s_re = delta.iter().map(|d| (2.0 * d).cos()).collect();
    let s_im = delta.iter().map(|d| (2.0 * d).sin()).collect();
    Ok(ScatteringResult { lambdas: lambdas.to_vec(), delta, s_re, s_im, x_match })
}

/// Closed-form phase shift of a square well of `depth` on [0, width], reduced to (−π/2, π/2].
pub fn square_well_phase(lambda: f64, depth: f64, width: f64) -> f64 {
    let k = (lambda * lambda + depth).sqrt();
    let d = (lambda / k * (k * width).tan()).atan() - lambda * width;
    reduce_half_period(d)
}

/// Representative of δ mod π in (−π/2, π/2].
pub fn reduce_half_period(d: f64) -> f64 {
    let r = d - PI * (d / PI).round();
    if r <= -PI / 2.0 {
        r + PI
    } else {
        r
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseComparison {
    /// arg⟨f, S_T f⟩.
    pub time_dependent: f64,
    /// arg ∫|ψ|² S dλ.
    pub stationary: f64,
    pub relative_error: f64,
    pub modulus: f64,
}

/// Compares ⟨f, e^{iTH₀}e^{−2iTH}e^{iTH₀} f⟩ with the packet average of the stationary S.
pub fn compare_phase(model: &CuspFreeModel, perturbation: &Perturbation, lambda0: f64, sigma: f64, t: f64) -> Result<PhaseComparison> {
    let op0 = model.free_operator()?;
    let (oph, _) = perturb_operator(&op0, perturbation)?;
    let s0 = SpectralDecomposition::new(&op0)?;
    let sh = SpectralDecomposition::new(&oph)?;
    let f = wave_packet(model, lambda0, sigma)?;
    let zero = vec![0.0; f.len()];
    let (ar, ai) = evolve_complex(&s0, &f, &zero, -t);
    let (br, bi) = evolve_complex(&sh, &ar, &ai, 2.0 * t);
    let (cr, ci) = evolve_complex(&s0, &br, &bi, -t);
    let z = Complex64::new(op0.inner(&f, &cr), op0.inner(&f, &ci)) / op0.inner(&f, &f);
    let mut lam = Vec::new();
    let mut wts = Vec::new();
    let (ls, ws) = composite_gauss((lambda0 - 6.0 * sigma).max(1e-3), lambda0 + 6.0 * sigma, 40, 8);
    for (l, w) in ls.iter().zip(&ws) {
        lam.push(*l);
        wts.push(w * (-(l - lambda0).powi(2) / (2.0 * sigma * sigma)).exp());
    }
    let st = smatrix_stationary(&op0.coefficients.clone_with(perturbation.clone()), &lam)?;
    let avg: Complex64 = (0..lam.len()).map(|k| st.s(k) * wts[k]).sum::<Complex64>() / wts.iter().sum::<f64>();
    let diff = (z / avg).arg();
    Ok(PhaseComparison { time_dependent: z.arg(), stationary: avg.arg(), relative_error: (diff / avg.arg()).abs(), modulus: z.norm() })
}

impl Coefficients {
    pub fn clone_with(&self, perturbation: Perturbation) -> Coefficients {
        Coefficients { perturbation: Some(perturbation), ..self.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillatoryBump {
    pub lambda0: f64,
    /// Gaussian width in the energy variable.
    pub width: f64,
    /// f(λ²+a) vanishes for λ < eps and the cutoff is 1 beyond 2·eps.
    pub eps: f64,
    pub threshold: f64,
    pub amplitude: f64,
}

fn smooth_step(r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    if r >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / r).exp();
    let b = (-1.0 / (1.0 - r)).exp();
    a / (a + b)
}

impl OscillatoryBump {
    /// f(λ² + a) as a function of λ.
    pub fn profile(&self, lambda: f64) -> f64 {
        let e = lambda * lambda;
        let e0 = self.lambda0 * self.lambda0;
        self.amplitude * (-(e - e0).powi(2) / (2.0 * self.width * self.width)).exp() * smooth_step(lambda / self.eps - 1.0)
    }

    fn support_top(&self) -> f64 {
        (self.lambda0 * self.lambda0 + 9.0 * self.width).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillatoryDecay {
    pub ts: Vec<f64>,
    pub magnitudes: Vec<f64>,
    /// Samples at or below this level are excluded from the fit.
    pub floor: f64,
    pub slope: f64,
    pub fitted_points: usize,
}

impl OscillatoryDecay {
    /// Whether the fitted slope is at most −m + 0.1.
    pub fn satisfies(&self, m: u32) -> bool {
        self.slope <= -(m as f64) + 0.1
    }
}

/// I(t) = ∫₀^∞ e^{2iuλ+itλ²} f(λ²+a) dλ on the t grid and its log-log slope.
pub fn oscillatory_decay_check(bump: &OscillatoryBump, u: f64, ts: &[f64]) -> Result<OscillatoryDecay> {
    if ts.iter().any(|t| !(u.abs() < bump.eps * t.abs() / 2.0)) {
        return Err(LabError::Input(format!("|u| = {} violates |u| < ε|t|/2 on the t grid", u.abs())));
    }
    let a = bump.eps;
    let b = bump.support_top();
    let l1: f64 = {
        let (xs, ws) = composite_gauss(a, b, 200, 16);
        xs.iter().zip(&ws).map(|(x, w)| w * bump.profile(*x).abs()).sum()
    };
    let magnitudes: Vec<f64> = ts
        .par_iter()
        .map(|&t| {
            // phase rate 2|u| + 2|t|λ: 20 nodes per radian-period of 2π
            let rate = 2.0 * u.abs() + 2.0 * t.abs() * b;
            let panels = ((b - a) * rate / (2.0 * PI) * 2.0).ceil().max(16.0) as usize;
            let (xs, ws) = composite_gauss(a, b, panels, 16);
            let mut re = CompensatedSum::default();
            let mut im = CompensatedSum::default();
            for (x, w) in xs.iter().zip(&ws) {
                let (s, c) = (2.0 * u * x + t * x * x).sin_cos();
                let v = w * bump.profile(*x);
                re.add(v * c);
                im.add(v * s);
            }
            re.value().hypot(im.value())
        })
        .collect();
    let floor = 1e-12 * l1;
    let pts: Vec<(f64, f64)> = ts.iter().zip(&magnitudes).filter(|(_, m)| **m > floor).map(|(t, m)| (t.ln(), m.ln())).collect();
    let slope = if pts.len() >= 3 {
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        fit_line(&xs, &ys).slope
    } else {
        f64::NEG_INFINITY
    };
    Ok(OscillatoryDecay { ts: ts.to_vec(), magnitudes, floor, slope, fitted_points: pts.len() })
}

/// α ∈ C_c^∞ on (μ_a, μ_b): exp(−1/(1−r²)) in the rescaled variable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralCutoff {
    pub mu_a: f64,
    pub mu_b: f64,
}

impl SpectralCutoff {
    pub fn eval(&self, mu: f64) -> f64 {
        let c = 0.5 * (self.mu_a + self.mu_b);
        let h = 0.5 * (self.mu_b - self.mu_a);
        let r = (mu - c) / h;
        if r.abs() < 1.0 {
            (1.0 - 1.0 / (1.0 - r * r)).exp()
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalDecay {
    pub ts: Vec<f64>,
    pub values: Vec<f64>,
    pub floor: f64,
    pub power: f64,
    pub fitted_points: usize,
}

fn complex_tridiagonal_solve(diag: &[Complex64], off: &[f64], rhs: &[Complex64]) -> Vec<Complex64> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut r = rhs.to_vec();
    for i in 1..n {
        let m = off[i - 1] / d[i - 1];
        d[i] -= m * off[i - 1];
        r[i] = r[i] - m * r[i - 1];
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let up = if i + 1 < n { x[i + 1] * off[i] } else { Complex64::new(0.0, 0.0) };
        x[i] = (r[i] - up) / d[i];
    }
    x
}

/// ‖(R_h(i) − R₀(i)) e^{−itH₀} α(H₀) P v‖ along `ts` for a test state given on the μ grid.
/// Negative times are allowed; the power is fitted against ln|t|.
///
/// Uses R_h − R₀ = −R_h V R₀; R₀ e^{−itH₀}α P v is evaluated by spectral quadrature on
/// [0, x_short] and R_h(i) by a finite-difference solve on the same short domain.
pub fn local_decay_integrand(
    grid: &SpectralGrid,
    projected: &[Complex64],
    alpha: &SpectralCutoff,
    potential: &Coefficients,
    x_short: f64,
    dx: f64,
    ts: &[f64],
) -> Result<LocalDecay> {
    let points = (x_short / dx).round() as usize - 1;
    let gs = GridSpec::uniform(0.0, x_short, points);
    let free = Coefficients { perturbation: None, ..potential.clone() };
    let end = match free.base {
        BaseCoefficients::LogX { n, .. } => EndModel::flat_torus_cusp(n, 1)?,
        _ => return Err(LabError::Input("local decay needs the log-coordinate cusp model".into())),
    };
    let op0 = build_mode_operator(&end, 0, &gs, Formulation::LogX)?;
    let pert = potential.perturbation.clone().ok_or_else(|| LabError::Input("no perturbation given".into()))?;
    let (oph, _) = perturb_operator(&op0, &pert)?;
    let xs = op0.nodes().to_vec();
    let v: Vec<f64> = xs.iter().map(|&x| potential.q(x) - free.q(x)).collect();
    let mus = grid.mu();
    let lams = grid.lambda();
    let weights: Vec<Complex64> = (0..grid.points)
        .map(|k| {
            let a = alpha.eval(mus[k]);
            projected[k] * (a / (2.0 * lams[k]).sqrt() * grid.d_mu * (2.0 / PI).sqrt()) / Complex64::new(mus[k], -1.0)
        })
        .collect();
    let diag: Vec<Complex64> = (0..oph.len()).map(|i| Complex64::new(oph.stiff_diag[i], -oph.mass[i])).collect();
    let values: Vec<f64> = ts
        .par_iter()
        .map(|&t| {
            let r0: Vec<Complex64> =
                xs.iter().map(|&x| (0..grid.points).map(|k| weights[k] * Complex64::from_polar((lams[k] * x).sin(), -t * mus[k])).sum()).collect();
            let rhs: Vec<Complex64> = r0.iter().zip(&v).zip(&oph.mass).map(|((z, v), m)| -z * v * m).collect();
            let u = complex_tridiagonal_solve(&diag, &oph.stiff_off, &rhs);
            u.iter().zip(&oph.mass).map(|(z, m)| z.norm_sqr() * m).sum::<f64>().sqrt()
        })
        .collect();
    let scale = grid.norm(projected);
    let floor = 1e-11 * scale;
    let pts: Vec<(f64, f64)> = ts.iter().zip(&values).filter(|(_, v)| **v > floor).map(|(t, v)| (t.abs().ln(), v.ln())).collect();
    let power = if pts.len() >= 3 {
        fit_line(&pts.iter().map(|p| p.0).collect::<Vec<_>>(), &pts.iter().map(|p| p.1).collect::<Vec<_>>()).slope
    } else {
        f64::NEG_INFINITY
    };
    Ok(LocalDecay { ts: ts.to_vec(), values, floor, power, fitted_points: pts.len() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnssReport {
    /// Condition (1): final values of the P∓ decay curves.
    pub outgoing_final: f64,
    pub incoming_final: f64,
    pub condition1: bool,
    /// Condition (2): rank of (Id − P_ac)α(H₀) on the truncated problem.
    pub point_rank: usize,
    pub condition2: bool,
    /// Condition (3): σ_k/σ₁ of R_h(−1) − R₀(−1) at k = 20.
    pub singular_value_ratio: f64,
    pub condition3: bool,
    /// Condition (4): fitted powers of the local-decay integrand.
    pub outgoing_power: f64,
    pub incoming_power: f64,
    pub condition4: bool,
}

/// Numerical surrogates for the four Enss conditions on a perturbed free cusp model.
pub fn verify_enss_conditions(model: &CuspFreeModel, perturbation: &Perturbation, alpha: &SpectralCutoff) -> Result<EnssReport> {
    let threshold = (model.n * model.n) as f64 / 4.0;
    let grid = SpectralGrid::new(model.n, threshold + 0.05, alpha.mu_b + 1.0, 0.005)?;
    let proj = EnssProjections::new(&grid);
    let lambda0 = ((alpha.mu_a + alpha.mu_b) / 2.0 - threshold).sqrt();
    let ts = geometric_grid(1.0, 30.0, 12);
    let out = proj.decay_curve(&directed_packet(&grid, lambda0, 0.2, 5.0, Direction::Outgoing), Direction::Outgoing, &ts);
    let inc = proj.decay_curve(&directed_packet(&grid, lambda0, 0.2, 5.0, Direction::Incoming), Direction::Incoming, &ts);
    let (outgoing_final, incoming_final) = (*out.last().unwrap(), *inc.last().unwrap());
    let op0 = model.free_operator()?;
    let (oph, _) = perturb_operator(&op0, perturbation)?;
    let eig_h = oph.eigenvalues()?;
    let point_rank = eig_h.iter().filter(|l| **l < threshold && alpha.eval(**l) != 0.0).count();
    let n = op0.len();
    let ratio = {
        let r = |op: &DiscreteOperator| -> Result<DMatrix<f64>> {
            let sd = SpectralDecomposition::new(op)?;
            Ok(crate::trace::function_matrix(&sd, |l| 1.0 / (l + 1.0)))
        };
        let d = r(&oph)? - r(&op0)?;
        let rep = crate::trace::schatten(&d, Some(&op0.mass), crate::trace::DEFAULT_DIM_CAP)?;
        let k = 20.min(n - 1);
        rep.singular_values[k] / rep.singular_values[0].max(f64::MIN_POSITIVE)
    };
    let v: Vec<f64> = model.x_nodes().iter().map(|x| (-(x - 3.0f64).powi(2)).exp()).collect();
    let psi = grid.represent(model, &v);
    let coef = op0.coefficients.clone_with(perturbation.clone());
    let (_, reach) = coefficient_breakpoints(&coef)?;
    let x_short = reach + 30.0;
    let tgrid = geometric_grid(10.0, 100.0, 10);
    let p_plus = proj.apply(&psi, Direction::Outgoing);
    let p_minus = proj.apply(&psi, Direction::Incoming);
    let lo = local_decay_integrand(&grid, &p_plus, alpha, &coef, x_short, 0.02, &tgrid)?;
    let back: Vec<f64> = tgrid.iter().map(|t| -t).collect();
    let li = local_decay_integrand(&grid, &p_minus, alpha, &coef, x_short, 0.02, &back)?;
    Ok(EnssReport {
        outgoing_final,
        incoming_final,
        condition1: outgoing_final < 0.01 && incoming_final < 0.01,
        point_rank,
        condition2: point_rank < n,
        singular_value_ratio: ratio,
        condition3: ratio < 1e-3,
        outgoing_power: lo.power,
        incoming_power: li.power,
        condition4: lo.power <= -2.0 && li.power <= -2.0,
    })
}
