//! Independent reference values: finite differences, closed forms and frozen high-precision results.

#![allow(clippy::excessive_precision)]

use num_complex::Complex64;
use scatlab::continuation::{resonance_scan, singular_values, ScanWindow, SupportDiscretization};
use scatlab::decay::DecayProfile;
use scatlab::geometry::{gunther_bishop_volume, knorm_difference, MetricPair, WarpedMetric};
use scatlab::operators::*;
use scatlab::scattering::{generalized_eigenfunction, reduce_half_period, smatrix_stationary, square_well_phase};
use scatlab::trace::{direct_heat_difference, duhamel_difference};
use std::f64::consts::PI;

// Square well of depth 6 and width 2 in the n = 2 cusp channel, computed with mpmath at 30 digits.
const WELL_POLES: [(f64, f64); 2] = [(2.9880367564314196336, -0.66853785513164896833), (4.852698808703318456, -0.80751465274302337719)];
const WELL_ANTIBOUND: f64 = -1.2989248039354066552;
const WELL_PHASES: [(f64, f64); 5] =
    [(0.5, 1.54708562343598739), (1.0, 0.617496504565837687), (1.5, -0.160895841301400645), (2.0, -0.832233694216638893), (3.0, -1.42669867513456825)];

fn well() -> Coefficients {
    Coefficients { base: BaseCoefficients::LogX { n: 2, lambda: 0.0 }, x_min: 0.0, perturbation: Some(Perturbation::SquareWell { depth: 6.0, width: 2.0 }) }
}

/// |∇^g − ∇^h|_g for dx² + φ²|dy|² against dx² + ψ²|dy|² on a flat n-torus, with φ′, ψ′ by central differences.
fn connection_difference_fd(g: &WarpedMetric, h: &WarpedMetric, x: f64, step: f64) -> f64 {
    let d = |m: &WarpedMetric| (m.phi(x + step) - m.phi(x - step)) / (2.0 * step);
    let (phi, psi) = (g.phi(x), h.phi(x));
    let (dphi, dpsi) = (d(g), d(h));
    let n = g.fiber_dim as f64;
    // Γ^x_ab = −φφ′δ_ab and Γ^a_xb = Γ^a_bx = (φ′/φ)δ^a_b, read in the g-orthonormal frame
    let radial = (psi * dpsi - phi * dphi) / (phi * phi);
    let mixed = dphi / phi - dpsi / psi;
    (n * radial * radial + 2.0 * n * mixed * mixed).sqrt()
}

#[test]
fn connection_difference_matches_finite_difference_christoffels() {
    let g = WarpedMetric::cusp(2);
    let h = WarpedMetric::cusp(2).perturbed(0.3, DecayProfile::power_law(2.0).unwrap());
    let pair = MetricPair::new(g.clone(), h.clone()).unwrap();
    let xs = [0.0, 0.3, 1.0, 2.5, 7.0];
    let k0 = knorm_difference(&pair, 0, &xs).unwrap();
    let k1 = knorm_difference(&pair, 1, &xs).unwrap();
    for (i, &x) in xs.iter().enumerate() {
        let exact = k1[i] - k0[i];
        let e1 = (connection_difference_fd(&g, &h, x, 1e-2) - exact).abs();
        let e2 = (connection_difference_fd(&g, &h, x, 5e-3) - exact).abs();
        assert!(e1 < 1e-3 * (1.0 + exact), "x={x}: {exact} vs fd error {e1}");
        // second order in the differencing step
        assert!(e2 < 0.3 * e1 || e2 < 1e-10, "x={x}: errors {e1} then {e2}");
    }
}

#[test]
fn hyperbolic_plane_volume_is_the_upper_comparison() {
    for r in [0.1, 0.5, 1.0, 3.0] {
        let v = gunther_bishop_volume(r, 1.0, 2).unwrap();
        let exact = 2.0 * PI * (r.cosh() - 1.0);
        assert!((v.upper - exact).abs() < 1e-12 * exact, "r={r}");
        let sphere = 2.0 * PI * (1.0 - r.cos());
        assert!((v.lower.unwrap() - sphere).abs() < 1e-12 * sphere, "r={r}");
    }
}

#[test]
fn square_well_phases_match_frozen_values() {
    let lams: Vec<f64> = WELL_PHASES.iter().map(|p| p.0).collect();
    let r = smatrix_stationary(&well(), &lams).unwrap();
    for (k, (lam, want)) in WELL_PHASES.iter().enumerate() {
        assert!((square_well_phase(*lam, 6.0, 2.0) - want).abs() < 1e-14, "closed form at λ={lam}");
        assert!(reduce_half_period(r.delta[k] - want).abs() < 1e-6, "shooting at λ={lam}: {}", r.delta[k]);
    }
}

#[test]
fn generalized_eigenfunction_vanishes_at_the_boundary_and_solves_the_mode_equation() {
    let n = 2;
    for lam in [0.3, 1.0, 4.0] {
        assert_eq!(generalized_eigenfunction(n, 1.0, lam).norm(), 0.0);
        // −u²e″ + (n−1)u e′ = (n²/4 + λ²)e by central differences
        for u in [1.5, 3.0, 10.0] {
            let h = 1e-3 * u;
            let e = |v: f64| generalized_eigenfunction(n, v, lam).im;
            let d1 = (e(u + h) - e(u - h)) / (2.0 * h);
            let d2 = (e(u + h) - 2.0 * e(u) + e(u - h)) / (h * h);
            let lhs = -u * u * d2 + (n as f64 - 1.0) * u * d1;
            let rhs = (1.0 + lam * lam) * e(u);
            assert!((lhs - rhs).abs() < 1e-4 * (1.0 + rhs.abs() + u * u * d2.abs()), "λ={lam} u={u}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn well_resonances_match_frozen_values_and_come_in_mirror_pairs() {
    let disc = SupportDiscretization::new(&well(), 0.5, 16).unwrap();
    let right = ScanWindow { re: (2.5, 5.5), im: (-1.2, -0.3), n_re: 31, n_im: 19 };
    let left = ScanWindow { re: (-5.5, -2.5), ..right };
    let pr = resonance_scan(&disc, &right, 0.5).unwrap().poles;
    let pl = resonance_scan(&disc, &left, 0.5).unwrap().poles;
    assert_eq!(pr.len(), 2, "{pr:?}");
    assert_eq!(pl.len(), 2, "{pl:?}");
    for (re, im) in WELL_POLES {
        let z = Complex64::new(re, im);
        assert!(pr.iter().any(|p| (p.z - z).norm() < 1e-8), "missing {z}");
        // {z, −z̄} symmetry of a real perturbation
        assert!(pl.iter().any(|p| (p.z + z.conj()).norm() < 1e-8), "missing mirror of {z}");
    }
    let sv = singular_values(&disc, Complex64::new(0.0, WELL_ANTIBOUND));
    assert!(sv.last().unwrap() / sv[0] < 1e-8, "anti-bound state: {sv:?}");
}

#[test]
fn duhamel_is_exact_for_a_constant_shift() {
    let end = EndModel::circle_cylinder(1).unwrap();
    let g = build_mode_operator(&end, 0, &GridSpec::uniform(0.0, 10.0, 60), Formulation::LogX).unwrap();
    let c = 0.7;
    let flat = Perturbation::Envelope { beta: DecayProfile::exponential(0.0).unwrap(), eps_p: 0.0, eps_w: 0.0, eps_q: c };
    let (h, _) = perturb_operator(&g, &flat).unwrap();
    let t = 0.5;
    let direct = direct_heat_difference(&g, &h, t).unwrap();
    let duhamel = duhamel_difference(&g, &h, t, 32).unwrap();
    // e^{−tG} − e^{−tH} = (1 − e^{−tc})e^{−tG} when H = G + c
    let ratio = direct.norm() / (duhamel.norm());
    assert!((ratio - 1.0).abs() < 1e-12);
    let sd = scatlab::funcalc::SpectralDecomposition::new(&g).unwrap();
    let reference = scatlab::trace::heat_matrix(&sd, t) * (1.0 - (-t * c).exp());
    assert!((&direct - &reference).norm() < 1e-12 * reference.norm(), "{}", (&direct - &reference).norm());
}
