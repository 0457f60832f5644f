use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scatlab::continuation::{birman_schwinger, Sheet, SheetCoordinate, SupportDiscretization};
use scatlab::covering::{greedy_cover, EuclideanCloud, HyperbolicCloud};
use scatlab::decay::{verify_moderate_decay, DecayGrid, DecayProfile};
use scatlab::geometry::{MetricPair, WarpedMetric};
use scatlab::operators::*;
use scatlab::scattering::{reduce_half_period, smatrix_stationary, EnssProjections, SpectralGrid};
use scatlab::trace::schatten;

fn profile() -> impl Strategy<Value = DecayProfile> {
    prop_oneof![
        (1.0f64..4.0).prop_map(|a| DecayProfile::power_law(a).unwrap()),
        (0.01f64..1.0).prop_map(|c| DecayProfile::exponential(c).unwrap()),
        // slow stretched exponentials only turn over beyond the default grid
        (0.5f64..2.0, 0.5f64..0.9).prop_map(|(c, a)| DecayProfile::stretched_exp(c, a).unwrap()),
    ]
}

fn well_coefficients(n: usize, depth: f64, width: f64) -> Coefficients {
    Coefficients { base: BaseCoefficients::LogX { n, lambda: 0.0 }, x_min: 0.0, perturbation: Some(Perturbation::SquareWell { depth, width }) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn moderate_decay_profiles_pass_with_envelope(beta in profile()) {
        let grid = DecayGrid::default();
        let r = verify_moderate_decay(&beta, &grid).unwrap();
        prop_assert!(r.c_beta > 0.0 && r.c_beta <= 1.0);
        prop_assert!(r.x_beta_tail_bounded);
        for i in 0..200 {
            let x = 1.0 + 999.0 * i as f64 / 199.0;
            let env = r.envelope.c_const * (-r.envelope.rate * x).exp();
            prop_assert!(beta.value(x) >= env * (1.0 - 1e-12), "x={x}: {} < {env}", beta.value(x));
        }
    }

    #[test]
    fn products_and_powers_stay_moderate(a in profile(), b in profile(), p in 0.5f64..3.0) {
        let grid = DecayGrid::default();
        let prod = DecayProfile::product(vec![a.clone(), b]).unwrap();
        let pow = DecayProfile::power(a, p).unwrap();
        prop_assert!(verify_moderate_decay(&prod, &grid).unwrap().x_beta_tail_bounded);
        prop_assert!(verify_moderate_decay(&pow, &grid).unwrap().c_beta > 0.0);
    }

    #[test]
    fn greedy_cover_covers_and_separates(seed in 0u64..1000, n in 1usize..300, h0 in 0.05f64..0.5, a in 1.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = HyperbolicCloud::sample(n, 3.0, &mut rng);
        let h: Vec<f64> = cloud.r.iter().map(|r| h0 * (1.0 + 0.1 * r)).collect();
        let rep = greedy_cover(&cloud, &h, a).unwrap();
        prop_assert!(rep.covered);
        prop_assert!(rep.separation >= 1.0);
        prop_assert!(rep.multiplicity >= 1);
    }

    #[test]
    fn multiplicity_is_monotone_in_dilation(seed in 0u64..1000, a in 1.0f64..2.0, da in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<Vec<f64>> = (0..200).map(|_| vec![rand::Rng::gen_range(&mut rng, 0.0..4.0), rand::Rng::gen_range(&mut rng, 0.0..4.0)]).collect();
        let cloud = EuclideanCloud { points };
        let h = vec![0.4; 200];
        let m1 = greedy_cover(&cloud, &h, a).unwrap().multiplicity;
        let m2 = greedy_cover(&cloud, &h, a + da).unwrap().multiplicity;
        prop_assert!(m1 <= m2);
    }

    #[test]
    fn perturbed_operators_are_symmetric(beta in profile(), ep in -0.3f64..0.3, ew in -0.3f64..0.3, eq in -2.0f64..2.0, seed in 0u64..100) {
        let end = EndModel::flat_torus_cusp(2, 2).unwrap();
        let op = build_mode_operator(&end, 1, &GridSpec::uniform(0.0, 6.0, 120), Formulation::LogX).unwrap();
        let (h, _) = perturb_operator(&op, &Perturbation::Envelope { beta, eps_p: ep, eps_w: ew, eps_q: eq }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f: Vec<f64> = (0..h.len()).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let g: Vec<f64> = (0..h.len()).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        prop_assert!(h.symmetry_defect(&f, &g) <= 1e-12);
        let ev = h.eigenvalues().unwrap();
        prop_assert!(ev.iter().all(|v| v.is_finite()));
        prop_assert!(ev.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn quasi_isometry_eigenvalue_window(eps in -0.4f64..0.4, x in 0.0f64..50.0) {
        let g = WarpedMetric::cusp(2);
        let h = WarpedMetric::cusp(2).perturbed(eps, DecayProfile::power_law(2.0).unwrap());
        let pair = MetricPair::new(g, h).unwrap();
        let (lo, hi) = pair.relative_eigenvalues(x);
        // tangential ratio is (1+εη)² with η ≤ 1, so |g−h|_g ≤ δ = (1+|ε|)² − 1
        let delta = (1.0 + eps.abs()).powi(2) - 1.0;
        prop_assert!(lo >= 1.0 - delta - 1e-12 && hi <= 1.0 + delta + 1e-12, "({lo}, {hi}) vs δ={delta}");
    }

    #[test]
    fn schatten_norms_are_ordered(seed in 0u64..1000, n in 2usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0));
        let r = schatten(&a, None, n).unwrap();
        prop_assert!(r.singular_values.iter().all(|s| *s >= 0.0));
        prop_assert!(r.singular_values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(r.hs_norm <= r.trace_norm * (1.0 + 1e-12));
        prop_assert!((r.hs_norm - a.norm()).abs() <= 1e-10 * a.norm());
    }

    #[test]
    fn reduced_phase_lies_in_half_period(d in -100.0f64..100.0) {
        let r = reduce_half_period(d);
        prop_assert!(r > -std::f64::consts::FRAC_PI_2 - 1e-12 && r <= std::f64::consts::FRAC_PI_2 + 1e-12);
        let k = (d - r) / std::f64::consts::PI;
        prop_assert!((k - k.round()).abs() < 1e-9);
    }

    #[test]
    fn sheet_coordinate_round_trip(re in -10.0f64..10.0, im in -10.0f64..10.0, thr in 0.0f64..3.0) {
        let lambda = Complex64::new(re, im);
        let c = SheetCoordinate::from_lambda(lambda, thr);
        prop_assert!((c.lambda() - lambda).norm() <= 1e-10 * (1.0 + lambda.norm()));
        prop_assert!(c.z.im >= 0.0);
        prop_assert!(c.sheet() == Sheet::Physical || c.z.im == 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn smatrix_is_unitary(depth in -4.0f64..8.0, width in 0.3f64..3.0, n in 1usize..4) {
        let lambdas: Vec<f64> = (1..40).map(|k| 0.15 * k as f64).collect();
        let r = smatrix_stationary(&well_coefficients(n, depth, width), &lambdas).unwrap();
        prop_assert!(r.max_unitarity_defect() <= 1e-10);
    }

    #[test]
    fn birman_schwinger_schwarz_symmetry(re in -5.0f64..5.0, im in -1.5f64..1.5, depth in 0.5f64..8.0) {
        let disc = SupportDiscretization::new(&well_coefficients(2, depth, 2.0), 0.5, 8).unwrap();
        let z = Complex64::new(re, im);
        let k = birman_schwinger(&disc, z);
        let kc = birman_schwinger(&disc, z.conj());
        let scale = k.iter().map(|v| v.norm()).fold(1.0, f64::max);
        // real coefficients: K(z̄) = conj K(−z) on the z-plane
        let km = birman_schwinger(&disc, -z);
        let d = kc.iter().zip(km.iter()).map(|(a, b)| (a - b.conj()).norm()).fold(0.0, f64::max);
        prop_assert!(d <= 1e-10 * scale, "defect {d}");
    }

    #[test]
    fn birman_schwinger_vanishes_up_the_physical_sheet(re in -3.0f64..3.0, depth in 0.5f64..8.0) {
        // panels resolve e^{−Im z·|x−y|} only while Im z·panel_len stays moderate
        let disc = SupportDiscretization::new(&well_coefficients(2, depth, 2.0), 0.5, 16).unwrap();
        let norms: Vec<f64> = [1.0, 3.0, 8.0].iter().map(|im| birman_schwinger(&disc, Complex64::new(re, *im)).norm()).collect();
        prop_assert!(norms[1] < norms[0] && norms[2] < norms[1]);
        // ‖K‖ ~ 1/|z|: from Im z = 1 to 8 at |Re z| ≤ 3 that is a factor below 0.37
        prop_assert!(norms[2] < 0.5 * norms[0]);
    }

    #[test]
    fn enss_projections_partition_identity(mu_max in 3.0f64..8.0, n in 1usize..4) {
        let thr = (n * n) as f64 / 4.0;
        let grid = SpectralGrid::new(n, thr + 0.1, thr + mu_max, 0.1).unwrap();
        let p = EnssProjections::new(&grid);
        let (sum, _, sa) = p.audit();
        prop_assert!(sum <= 1e-10);
        prop_assert!(sa <= 1e-10);
    }
}
