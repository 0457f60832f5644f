//! Heat-semigroup differences: Duhamel quadrature, Schatten norms on weighted
//! spaces, truncation stability of trace norms, and the trace-class hypothesis
//! checker.

use crate::decay::DecayProfile;
use crate::error::{LabError, Result};
use crate::funcalc::SpectralDecomposition;
use crate::geometry::{InjectivityModel, WarpedMetric};
use crate::numerics::fit::{fit_line, geometric_grid, tail_growth, TailFit};
use crate::numerics::quad::{composite_gauss, gauss_legendre_on};
use crate::operators::{build_mode_operator, perturb_operator, DiscreteOperator, EndModel, Formulation, GridSpec, Perturbation};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default cap on dense matrix dimension.
pub const DEFAULT_DIM_CAP: usize = 4000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchattenReport {
    /// Descending.
    pub singular_values: Vec<f64>,
    pub trace_norm: f64,
    pub hs_norm: f64,
    pub effective_rank: usize,
}

/// Singular values of W^{½} A W^{−½} (identity weights when `weights` is `None`).
pub fn schatten(a: &DMatrix<f64>, weights: Option<&[f64]>, cap: usize) -> Result<SchattenReport> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LabError::Input("operator matrix must be square".into()));
    }
    if n > cap {
        return Err(LabError::Refused(format!("dimension {n} exceeds the cap {cap}; truncate the domain to at most {cap} nodes")));
    }
    let mut b = a.clone();
    if let Some(w) = weights {
        if w.len() != n || w.iter().any(|v| !(*v > 0.0)) {
            return Err(LabError::Input("weights must be positive, one per row".into()));
        }
        for i in 0..n {
            b.row_mut(i).scale_mut(w[i].sqrt());
            b.column_mut(i).scale_mut(1.0 / w[i].sqrt());
        }
    }
    let mut sv: Vec<f64> = b.singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    let trace_norm = sv.iter().sum();
    let hs_norm = sv.iter().map(|s| s * s).sum::<f64>().sqrt();
    let top = sv.first().copied().unwrap_or(0.0);
    let effective_rank = sv.iter().filter(|s| **s > 1e-12 * top && top > 0.0).count();
    Ok(SchattenReport { singular_values: sv, trace_norm, hs_norm, effective_rank })
}

/// Matrix of g(A) acting on nodal values: V g(Λ) Vᵀ M.
pub fn function_matrix(sd: &SpectralDecomposition, g: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let mut left = sd.vectors.clone();
    for (j, l) in sd.values.iter().enumerate() {
        left.column_mut(j).scale_mut(g(*l));
    }
    let mut right = sd.vectors.clone();
    for (i, m) in sd.mass.iter().enumerate() {
        right.row_mut(i).scale_mut(*m);
    }
    left * right.transpose()
}

pub fn heat_matrix(sd: &SpectralDecomposition, t: f64) -> DMatrix<f64> {
    function_matrix(sd, |l| (-t * l).exp())
}

fn same_grid(g: &DiscreteOperator, h: &DiscreteOperator) -> Result<()> {
    if g.grid.len() != h.grid.len() || g.grid.iter().zip(&h.grid).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0)) {
        return Err(LabError::Input("operators are discretized on different grids".into()));
    }
    Ok(())
}

/// e^{−tA_g} − e^{−tA_h}.
pub fn direct_heat_difference(op_g: &DiscreteOperator, op_h: &DiscreteOperator, t: f64) -> Result<DMatrix<f64>> {
    same_grid(op_g, op_h)?;
    let (sg, sh) = (SpectralDecomposition::new(op_g)?, SpectralDecomposition::new(op_h)?);
    Ok(heat_matrix(&sg, t) - heat_matrix(&sh, t))
}

/// ∫₀ᵗ e^{−sA_g}(A_h − A_g)e^{−(t−s)A_h} ds with m-point Gauss–Legendre in s.
pub fn duhamel_difference(op_g: &DiscreteOperator, op_h: &DiscreteOperator, t: f64, m: usize) -> Result<DMatrix<f64>> {
    same_grid(op_g, op_h)?;
    if m < 8 {
        return Err(crate::error::param("m", "Duhamel quadrature needs at least 8 nodes"));
    }
    if !(t > 0.0) {
        return Err(crate::error::param("t", "heat time must be positive"));
    }
    let (sg, sh) = (SpectralDecomposition::new(op_g)?, SpectralDecomposition::new(op_h)?);
    let diff = op_h.dense() - op_g.dense();
    let (nodes, weights) = gauss_legendre_on(m, 0.0, t);
    let n = op_g.len();
    let terms: Vec<DMatrix<f64>> =
        nodes.par_iter().zip(weights.par_iter()).map(|(&s, &w)| (heat_matrix(&sg, s) * &diff * heat_matrix(&sh, t - s)) * w).collect();
    Ok(terms.into_iter().fold(DMatrix::zeros(n, n), |acc, x| acc + x))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralVerdict {
    pub finite: bool,
    /// Partial integrals ∫₀^X at the sample cut-offs.
    pub cutoffs: Vec<f64>,
    pub partial: Vec<f64>,
    pub tail: TailFit,
    /// Local log-log slope of the integrand near the largest cut-off.
    pub integrand_tail_slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupVerdict {
    pub exponent: f64,
    pub sup: f64,
    pub bounded: bool,
    pub tail: TailFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub a: f64,
    pub b: f64,
    /// Dimension n of M used in the exponents.
    pub n: usize,
    pub check_i: bool,
    pub check_ii: IntegralVerdict,
    /// With exponent n(n+2)/2.
    pub check_iii: SupVerdict,
    /// With the exponent n(n+1)/2 from the heat-kernel estimate.
    pub check_iii_heat_kernel_exponent: SupVerdict,
    pub pass: bool,
}

fn sup_check(beta: &DecayProfile, a: f64, inj: &InjectivityModel, exponent: f64, xs: &[f64]) -> SupVerdict {
    let ln: Vec<f64> = xs.iter().map(|&x| a / 3.0 * beta.ln_value(1.0 + x) - exponent * inj.ln_itilde(x)).collect();
    let tail = tail_growth(xs, &ln);
    let sup = ln.iter().cloned().fold(f64::NEG_INFINITY, f64::max).exp();
    SupVerdict { exponent, sup, bounded: sup.is_finite() && tail.bounded, tail }
}

/// Conditions i)–iii) of the trace-class theorem for a warped end with injectivity model `inj`.
pub fn check_trace_class_hypotheses(beta: &DecayProfile, a: f64, b: f64, metric: &WarpedMetric, inj: &InjectivityModel) -> Result<HypothesisReport> {
    beta.validate()?;
    metric.validate()?;
    let n = metric.dim();
    let check_i = b >= 1.0 && (a + b - 2.0).abs() < 1e-12;
    let cutoffs = geometric_grid(1.0, 1e8, 65);
    let ln_g = |x: f64| b / 3.0 * beta.ln_value(1.0 + x) + metric.ln_volume_density(x);
    let mut partial = Vec::with_capacity(cutoffs.len());
    let mut acc = 0.0;
    let mut lo = 0.0;
    for &c in &cutoffs {
        let (xs, ws) = composite_gauss(lo, c, 8, 12);
        acc += xs.iter().zip(&ws).map(|(x, w)| w * ln_g(*x).exp()).sum::<f64>();
        partial.push(acc);
        lo = c;
    }
    let ln_partial: Vec<f64> = partial.iter().map(|v| v.ln()).collect();
    let tail = tail_growth(&cutoffs, &ln_partial);
    let x1 = cutoffs[cutoffs.len() - 2];
    let x2 = *cutoffs.last().unwrap();
    let integrand_tail_slope = (ln_g(x2) - ln_g(x1)) / (x2.ln() - x1.ln());
    let check_ii = IntegralVerdict { finite: tail.bounded && acc.is_finite(), cutoffs, partial, tail, integrand_tail_slope };
    let xs = geometric_grid(0.01, 1e3, 400);
    let nf = n as f64;
    let check_iii = sup_check(beta, a, inj, nf * (nf + 2.0) / 2.0, &xs);
    let check_iii_heat_kernel_exponent = sup_check(beta, a, inj, nf * (nf + 1.0) / 2.0, &xs);
    let pass = check_i && check_ii.finite && check_iii.bounded;
    Ok(HypothesisReport { a, b, n, check_i, check_ii, check_iii, check_iii_heat_kernel_exponent, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub l: f64,
    pub points: usize,
    pub t: f64,
    pub trace_norm: f64,
    pub hs_norm: f64,
    /// Relative change from the previous row (0 for the first row).
    pub increment: f64,
}

/// Trace norm of the heat difference on [x_min, L] for each L at fixed spacing `dx`.
pub fn truncation_stability(
    end: &EndModel,
    mode: usize,
    formulation: Formulation,
    x_min: f64,
    dx: f64,
    perturbation: &Perturbation,
    t: f64,
    ls: &[f64],
) -> Result<Vec<TruncationRow>> {
    let mut rows: Vec<TruncationRow> = ls
        .par_iter()
        .map(|&l| {
            let points = ((l - x_min) / dx).round() as usize - 1;
            let g = build_mode_operator(end, mode, &GridSpec::uniform(x_min, l, points), formulation)?;
            let (h, _) = perturb_operator(&g, perturbation)?;
            let d = direct_heat_difference(&g, &h, t)?;
            let rep = schatten(&d, Some(&g.mass), DEFAULT_DIM_CAP)?;
            Ok(TruncationRow { l, points, t, trace_norm: rep.trace_norm, hs_norm: rep.hs_norm, increment: 0.0 })
        })
        .collect::<Result<Vec<_>>>()?;
    for i in 1..rows.len() {
        let prev = rows[i - 1].trace_norm;
        rows[i].increment = if prev == 0.0 {
            if rows[i].trace_norm == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (rows[i].trace_norm - prev) / prev
        };
    }
    Ok(rows)
}

/// Gaussian off-diagonal envelope of the discrete heat kernel: fit of ln|K_t(x,y)| against d².
pub fn heat_kernel_envelope(op: &DiscreteOperator, sd: &SpectralDecomposition, t: f64) -> Result<f64> {
    let k = function_matrix(sd, |l| (-t * l).exp());
    let x = op.nodes();
    let n = x.len();
    let centre = n / 2;
    let mut d2 = Vec::new();
    let mut ln = Vec::new();
    let top = (0..n).map(|j| (k[(centre, j)] / op.mass[j]).abs()).fold(0.0, f64::max);
    for j in 0..n {
        let v = (k[(centre, j)] / op.mass[j]).abs();
        if v > 1e-10 * top {
            d2.push((x[j] - x[centre]).powi(2));
            ln.push(v.ln());
        }
    }
    if d2.len() < 3 {
        return Err(LabError::Numerical("heat kernel too concentrated for an envelope fit".into()));
    }
    Ok(-fit_line(&d2, &ln).slope)
}

/// Trace norm of M_β Aᵖ e^{−tA} on L²(M).
pub fn weighted_heat_trace_norm(sd: &SpectralDecomposition, beta: &[f64], p: i32, t: f64) -> Result<f64> {
    let mut m = function_matrix(sd, |l| l.powi(p) * (-t * l).exp());
    for (i, b) in beta.iter().enumerate() {
        m.row_mut(i).scale_mut(*b);
    }
    Ok(schatten(&m, Some(&sd.mass), DEFAULT_DIM_CAP)?.trace_norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::injectivity_envelope;
    use nalgebra::DVector;

    fn cyl_op(l: f64, points: usize) -> DiscreteOperator {
        build_mode_operator(&EndModel::circle_cylinder(1).unwrap(), 0, &GridSpec::uniform(0.0, l, points), Formulation::LogX).unwrap()
    }

    #[test]
    fn schatten_basics() {
        let z = schatten(&DMatrix::zeros(4, 4), None, 10).unwrap();
        assert!(z.singular_values.iter().all(|s| *s == 0.0) && z.effective_rank == 0);
        let u = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let v = DVector::from_vec(vec![0.5, 0.0, 3.0]);
        let r = schatten(&(&u * v.transpose()), None, 10).unwrap();
        assert!((r.trace_norm - u.norm() * v.norm()).abs() < 1e-12);
        assert!(r.hs_norm <= r.trace_norm && r.effective_rank == 1);
        assert!(matches!(schatten(&DMatrix::zeros(5, 5), None, 4), Err(LabError::Refused(_))));
    }

    #[test]
    fn duhamel_matches_direct_and_trace_identity() {
        let g = cyl_op(10.0, 39);
        let pert = Perturbation::Envelope { beta: DecayProfile::power_law(2.0).unwrap(), eps_p: 0.0, eps_w: 0.0, eps_q: 0.5 };
        let (h, _) = perturb_operator(&g, &pert).unwrap();
        let direct = direct_heat_difference(&g, &h, 1.0).unwrap();
        let duh = duhamel_difference(&g, &h, 1.0, 32).unwrap();
        assert!((&direct - &duh).norm() < 1e-8);
        let same = duhamel_difference(&g, &g, 1.0, 8).unwrap();
        assert!(same.amax() == 0.0);
        let (eg, eh) = (g.eigenvalues().unwrap(), h.eigenvalues().unwrap());
        let want: f64 = eg.iter().zip(&eh).map(|(a, b)| (-a).exp() - (-b).exp()).sum();
        assert!((direct.trace() - want).abs() < 1e-10);
        let other = cyl_op(10.0, 40);
        assert!(matches!(duhamel_difference(&g, &other, 1.0, 32), Err(LabError::Input(_))));
    }

    #[test]
    fn cylinder_hypotheses() {
        let cyl = WarpedMetric::cylinder(1);
        let inj = injectivity_envelope(&cyl, 0.0).unwrap();
        let ok = check_trace_class_hypotheses(&DecayProfile::power_law(2.0).unwrap(), 0.0, 2.0, &cyl, &inj).unwrap();
        assert!(ok.pass && ok.check_i && ok.check_ii.finite && ok.check_iii.bounded);
        let bad = check_trace_class_hypotheses(&DecayProfile::power_law(1.0).unwrap(), 0.0, 2.0, &cyl, &inj).unwrap();
        assert!(!bad.check_ii.finite && !bad.pass);
        let wrong_ab = check_trace_class_hypotheses(&DecayProfile::power_law(2.0).unwrap(), 0.5, 0.5, &cyl, &inj).unwrap();
        assert!(!wrong_ab.check_i);
    }

    #[test]
    fn cusp_example_exponents() {
        // cross-section dimension 1, so dim M = 2
        let cusp = WarpedMetric::cusp(1);
        let inj = injectivity_envelope(&cusp, 0.0).unwrap();
        let n = 2.0;
        let beta = DecayProfile::exponential(n * (n + 1.0) / 2.0 + 4.0 * n).unwrap();
        let r = check_trace_class_hypotheses(&beta, 1.0, 1.0, &cusp, &inj).unwrap();
        assert!(r.check_i && r.check_ii.finite);
        assert!(r.check_iii_heat_kernel_exponent.bounded);
        assert!(!r.check_iii.bounded);
        let strong = DecayProfile::exponential(12.0).unwrap();
        assert!(check_trace_class_hypotheses(&strong, 1.0, 1.0, &cusp, &inj).unwrap().pass);
    }

    #[test]
    fn truncation_stability_zero_perturbation() {
        let pert = Perturbation::Envelope { beta: DecayProfile::power_law(2.0).unwrap(), eps_p: 0.0, eps_w: 0.0, eps_q: 0.0 };
        let rows = truncation_stability(&EndModel::circle_cylinder(1).unwrap(), 0, Formulation::LogX, 0.0, 0.5, &pert, 1.0, &[20.0, 40.0]).unwrap();
        assert!(rows.iter().all(|r| r.trace_norm == 0.0 && r.increment == 0.0));
    }

    #[test]
    fn heat_kernel_gaussian_envelope_and_monotone_trace() {
        let op = cyl_op(20.0, 399);
        let sd = SpectralDecomposition::new(&op).unwrap();
        let c1 = heat_kernel_envelope(&op, &sd, 1.0).unwrap();
        assert!(c1 > 0.0 && (c1 - 0.25).abs() < 0.05, "{c1}");
        let beta: Vec<f64> = op.nodes().iter().map(|x| (1.0 + x).powi(-2)).collect();
        let mut last = f64::INFINITY;
        for t in [0.5, 1.0, 2.0, 4.0] {
            let v = weighted_heat_trace_norm(&sd, &beta, 1, t).unwrap();
            assert!(v <= last);
            last = v;
        }
    }
}
