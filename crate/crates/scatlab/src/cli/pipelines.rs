use super::catalog::Kind;
use super::config::*;
use super::{ArtifactSink, Check};
use crate::continuation::{resonance_scan, ScanWindow, SupportDiscretization};
use crate::covering::{greedy_cover, kappa_growth, HyperbolicCloud};
use crate::decay::DecayProfile;
use crate::error::{LabError, Result};
use crate::funcalc::{cosine_propagator, leakage_outside, mollified_point_mass, weighted_opnorm_growth, PropagatorMethod, SpectralDecomposition};
use crate::geometry::{equivalence_axioms, equivalence_grid, injectivity_envelope, WarpedTriple};
use crate::numerics::fit::linear_grid;
use crate::operators::{build_mode_operator, BaseCoefficients, Coefficients, Perturbation};
use crate::scattering::{reduce_half_period, smatrix_stationary, square_well_phase, wave_operator, wave_packet, CuspFreeModel};
use crate::trace::{check_trace_class_hypotheses, truncation_stability};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn f(v: f64) -> String {
    format!("{v}")
}

fn section<T>(s: &Option<T>) -> Result<&T> {
    s.as_ref().ok_or_else(|| LabError::Config { path: "section".into(), reason: "missing".into() })
}

pub(super) fn dispatch(kind: Kind, cfg: &ExperimentConfig, sink: &mut ArtifactSink, checks: &mut Vec<Check>) -> Result<()> {
    match kind {
        Kind::EquivCheck => equiv_check(cfg.seed, section(&cfg.equiv_check)?, sink, checks),
        Kind::Cover => cover(cfg.seed, section(&cfg.cover)?, sink, checks),
        Kind::Spectrum => spectrum(section(&cfg.spectrum)?, sink, checks),
        Kind::Propagate => propagate(section(&cfg.propagate)?, sink, checks),
        Kind::OpnormGrowth => opnorm(section(&cfg.opnorm_growth)?, sink, checks),
        Kind::HeatTrace => heat_trace(section(&cfg.heat_trace)?, sink, checks),
        Kind::WaveOp => wave_op(section(&cfg.wave_op)?, sink, checks),
        Kind::Smatrix => smatrix(section(&cfg.smatrix)?, sink, checks),
        Kind::ResolventCont => resolvent(section(&cfg.resolvent_cont)?, sink, checks),
        Kind::Hypotheses => hypotheses(section(&cfg.hypotheses)?, sink, checks),
    }
}

fn equiv_check(seed: u64, c: &EquivCheck, sink: &mut ArtifactSink, checks: &mut Vec<Check>) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = equivalence_grid(c.x_max, c.points);
    let mut rows = Vec::new();
    let mut all = [true; 4];
    for i in 0..c.triples {
        let t = WarpedTriple::random(&mut rng)?;
        let r = equivalence_axioms(&t, c.k, &xs)?;
        for (a, v) in all.iter_mut().zip([r.reflexive, r.symmetric, r.transitive, r.characterization_agree]) {
            *a &= v;
        }
        let mut row = vec![i.to_string(), t.metrics[0].fiber_dim.to_string(), serde_json::to_string(&t.beta).unwrap_or_default()];
        row.extend([r.reflexive, r.symmetric, r.transitive, r.characterization_agree].iter().map(|b| b.to_string()));
        row.extend(r.verdicts.iter().map(|b| b.to_string()));
        rows.push(row);
    }
    sink.csv(
        "triples.csv",
        &["triple", "fiber_dim", "beta", "reflexive", "symmetric", "transitive", "characterization_agree", "v01", "v10", "v12", "v21", "v02", "v20"],
        rows,
    )?;
    for (name, v) in ["reflexive", "symmetric", "transitive", "characterization_agree"].iter().zip(all) {
        checks.push(Check::flag(name, v));
    }
    Ok(())
}

fn cover(seed: u64, c: &Cover, sink: &mut ArtifactSink, checks: &mut Vec<Check>) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cloud = HyperbolicCloud::sample(c.points, c.radius, &mut rng);
    let h = vec![c.h; c.points];
    let rep = greedy_cover(&cloud, &h, c.a)?;
    sink.csv(
        "centers.csv",
        &["index", "r", "theta", "radius"],
        rep.centers.iter().zip(&rep.radii).map(|(i, r)| vec![i.to_string(), f(cloud.r[*i]), f(cloud.theta[*i]), f(*r)]),
    )?;
    checks.push(Check::flag("coverage", rep.covered));
    checks.push(Check::at_least("separation", rep.separation, 1.0));
    checks.push(Check { name: "multiplicity".into(), pass: true, value: rep.multiplicity as f64, threshold: f64::INFINITY });
    if !c.kappa_s.is_empty() {
        let g = kappa_growth(&cloud, &c.kappa_s, c.kappa_eps)?;
        sink.csv("kappa.csv", &["s", "kappa"], g.estimates.iter().map(|e| vec![f(e.s), e.kappa.to_string()]))?;
        checks.push(Check::flag("kappa_envelope_finite", g.envelope_const.is_finite()));
    }
    sink.json(
        "cover.json",
        &serde_json::json!({
            "centers": rep.centers.len(),
            "multiplicity": rep.multiplicity,
            "overlap_degree": rep.overlap_degree,
            "separation": rep.separation,
            "covered": rep.covered,
        }),
    )
}

fn spectrum(c: &Spectrum, sink: &mut ArtifactSink, checks: &mut Vec<Check>) -> Result<()> {
    let s = &c.setup;
    let op = build_mode_operator(&s.end, s.mode, &s.grid, s.formulation)?;
    let ev = op.eigenvalues()?;
    let count = c.count.min(ev.len());
    sink.csv("eigenvalues.csv", &["k", "eigenvalue"], ev[..count].iter().enumerate().map(|(k, v)| vec![k.to_string(), f(*v)]))?;
    checks.push(Check::flag("ascending", ev.windows(2).all(|w| w[0] <= w[1])));
    checks.push(Check::flag("resolution_warnings_absent", op.warnings.is_empty()));
    Ok(())
}

fn propagate(c: &Propagate, sink: &mut ArtifactSink, checks: &mut Vec<Check>) -> Result<()> {
    let s = &c.setup;
    let op = build_mode_operator(&s.end, s.mode, &s.grid, s.formulation)?;
    let u0 = mollified_point_mass(&op, c.x0, c.delta);
    let (method, sd) = match c.method {
        MethodName::Spectral => (PropagatorMethod::Spectral, Some(SpectralDecomposition::new(&op)?)),
        MethodName::Leapfrog => (PropagatorMethod::Leapfrog { dt: c.dt }, None),
    };
    let r = cosine_propagator(&op, &u0, c.s, method, sd.as_ref())?;
    let radius = c.s + c.delta;
    let leak = leakage_outside(&op, &r.values, c.x0, radius);
    sink.csv("solution.csv", &["x", "u0", "u"], op.nodes().iter().zip(&u0).zip(&r.values).map(|((x, a), b)| vec![f(*x), f(*a), f(*b)]))?;
    checks.push(Check::at_most("leakage", leak, c.leakage_tol));
    Ok(())
}

fn opnorm(c: &OpnormGrowth, sink: &mut ArtifactSink, checks: &mut Vec<Check>) -> Result<()> {
    let s = &c.setup;
    let op = build_mode_operator(&s.end, s.mode, &s.grid, s.formulation)?;
    let sd = SpectralDecomposition::new(&op)?;
    let grid = linear_grid(0.0, c.s_max, c.s_points);
    let g = weighted_opnorm_growth(&op, &sd, &c.beta, &grid)?;
    sink.csv(
        "opnorm.csv",
        &["s", "norm", "ln_norm", "fit"],
        g.s.iter().zip(&g.norms).map(|(s, n)| vec![f(*s), f(*n), f(n.ln()), f(g.fit.intercept + g.fit.slope * s.abs())]),
    )?;
    checks.push(Check::at_most("log_linear_residual", g.fit.max_residual, c.residual_tol));
    Ok(())
}

fn heat_trace(c: &HeatTrace, sink: &mut ArtifactSink, checks: &mut Vec<Check>) -> Result<()> {
    let none = Perturbation::Envelope { beta: DecayProfile::exponential(0.0)?, eps_p: 0.0, eps_w: 0.0, eps_q: 0.0 };
    let pert = c.perturbation.clone().unwrap_or(none);
    let rows = truncation_stability(&c.end, c.mode, c.formulation, c.x_min, c.dx, &pert, c.t, &c.lengths)?;
    sink.csv(
        "truncation.csv",
        &["length", "points", "t", "trace_norm", "hs_norm", "increment"],
        rows.iter().map(|r| vec![f(r.l), r.points.to_string(), f(r.t), f(r.trace_norm), f(r.hs_norm), f(r.increment)]),
    )?;
    let last = rows.last().map(|r| r.increment.abs()).unwrap_or(0.0);
    checks.push(Check::at_most("last_relative_increment", last, c.stability_tol));
    Ok(())
}

fn wave_op(c: &WaveOp, sink: &mut ArtifactSink, checks: &mut Vec<Check>) -> Result<()> {
    let m = &c.model;
    let model = CuspFreeModel::new(m.n, m.x_max, m.points, m.lambda_max, m.lambda_points)?;
    let op0 = model.free_operator()?;
    let (oph, _) = crate::operators::perturb_operator(&op0, &c.perturbation)?;
    let packet = wave_packet(&model, c.lambda0, c.sigma)?;
    let r = wave_operator(&op0, &oph, &packet, &c.times)?;
    sink.csv("cauchy.csv", &["t", "increment"], r.times[1..].iter().zip(&r.cauchy_increments).map(|(t, v)| vec![f(*t), f(*v)]))?;
    sink.json("wave_operator.json", &r)?;
    checks.push(Check::at_most("isometry_defect", r.isometry_defect, c.isometry_tol));
    checks.push(Check::flag("cauchy_increments_decrease", r.cauchy_increments.windows(2).all(|w| w[1] < w[0])));
    Ok(())
}

fn smatrix(c: &Smatrix, sink: &mut ArtifactSink, checks: &mut Vec<Check>) -> Result<()> {
    let coef = Coefficients { base: BaseCoefficients::LogX { n: c.n, lambda: 0.0 }, x_min: 0.0, perturbation: Some(c.perturbation.clone()) };
    let lambdas = linear_grid(c.lambda_min, c.lambda_max, c.lambda_points);
    let r = smatrix_stationary(&coef, &lambdas)?;
    let oracle: Vec<Option<f64>> = lambdas
        .iter()
        .map(|l| match c.perturbation {
            Perturbation::SquareWell { depth, width } => Some(square_well_phase(*l, depth, width)),
            _ => None,
        })
        .collect();
    let mut worst: f64 = 0.0;
    let rows: Vec<Vec<String>> = (0..lambdas.len())
        .map(|k| {
            let s = r.s(k);
            if let Some(o) = oracle[k] {
                worst = worst.max(reduce_half_period(r.delta[k] - o).abs());
            }
            vec![f(lambdas[k]), f(r.delta[k]), f(s.re), f(s.im), f(s.norm()), oracle[k].map(f).unwrap_or_default()]
        })
        .collect();
    sink.csv("smatrix.csv", &["lambda", "delta", "s_re", "s_im", "abs_s", "oracle_delta"], rows)?;
    checks.push(Check::at_most("unitarity", r.max_unitarity_defect(), c.unitarity_tol));
    if oracle.iter().all(Option::is_some) {
        checks.push(Check::at_most("oracle_phase", worst, c.oracle_tol));
    }
    Ok(())
}

fn resolvent(c: &ResolventCont, sink: &mut ArtifactSink, checks: &mut Vec<Check>) -> Result<()> {
    let coef = Coefficients { base: BaseCoefficients::LogX { n: c.n, lambda: 0.0 }, x_min: 0.0, perturbation: c.perturbation.clone() };
    let disc = SupportDiscretization::new(&coef, c.panel_len, c.order)?;
    let window = ScanWindow { re: (c.re[0], c.re[1]), im: (c.im[0], c.im[1]), n_re: c.n_re, n_im: c.n_im };
    let r = resonance_scan(&disc, &window, c.candidate_threshold)?;
    sink.csv("heatmap.csv", &["re_z", "im_z", "log10_min_sv"], r.heatmap.iter().map(|(a, b, v)| vec![f(*a), f(*b), f(*v)]))?;
    let poles: Vec<serde_json::Value> = r
        .poles
        .iter()
        .map(|p| serde_json::json!({"re_z": p.z.re, "im_z": p.z.im, "re_lambda": p.lambda.re, "im_lambda": p.lambda.im, "min_sv": p.min_sv, "rank": p.rank}))
        .collect();
    sink.json(
        "poles.json",
        &serde_json::json!({
            "window": {"re": c.re, "im": c.im},
            "grid": {"n_re": c.n_re, "n_im": c.n_im},
            "poles": poles,
            "flagged": r.flagged.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
        }),
    )?;
    checks.push(Check::flag("poles_confirmed", r.poles.iter().all(|p| p.winding >= 1 && p.min_sv < 1e-6)));
    Ok(())
}

fn hypotheses(c: &Hypotheses, sink: &mut ArtifactSink, checks: &mut Vec<Check>) -> Result<()> {
    let inj = injectivity_envelope(&c.metric, c.base_point)?;
    let r = check_trace_class_hypotheses(&c.beta, c.a, c.b, &c.metric, &inj)?;
    sink.json("hypotheses.json", &r)?;
    checks.push(Check::flag("condition_i", r.check_i));
    checks.push(Check::flag("condition_ii", r.check_ii.finite));
    checks.push(Check::flag("condition_iii", r.check_iii.bounded));
    Ok(())
}
