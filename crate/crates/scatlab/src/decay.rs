//! Functions of moderate decay: positive non-increasing β on [1, ∞) with
//! sup xβ(x) < ∞ and β(x+y) ≥ C_β β(x)β(y).

use crate::error::{param, LabError, Result};
use crate::numerics::fit::{geometric_grid, tail_growth};
use crate::numerics::jet::Jet;
use serde::{Deserialize, Serialize};

/// Safety factor applied to the grid estimate of C_β before downstream use.
pub const C_BETA_SAFETY: f64 = 0.99;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params")]
pub enum DecayProfile {
    PowerLaw { a: f64 },
    Exponential { c: f64 },
    StretchedExp { c: f64, alpha: f64 },
    Product(Vec<DecayProfile>),
    Power { base: Box<DecayProfile>, exponent: f64 },
}

impl DecayProfile {
    pub fn power_law(a: f64) -> Result<Self> {
        let p = DecayProfile::PowerLaw { a };
        p.validate()?;
        Ok(p)
    }

    pub fn exponential(c: f64) -> Result<Self> {
        let p = DecayProfile::Exponential { c };
        p.validate()?;
        Ok(p)
    }

    pub fn stretched_exp(c: f64, alpha: f64) -> Result<Self> {
        let p = DecayProfile::StretchedExp { c, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn product(factors: Vec<DecayProfile>) -> Result<Self> {
        let p = DecayProfile::Product(factors);
        p.validate()?;
        Ok(p)
    }

    pub fn power(base: DecayProfile, exponent: f64) -> Result<Self> {
        let p = DecayProfile::Power { base: Box::new(base), exponent };
        p.validate()?;
        Ok(p)
    }

    /// Checks parameter ranges recursively.
    pub fn validate(&self) -> Result<()> {
        match self {
            DecayProfile::PowerLaw { a } => {
                if !(a.is_finite() && *a > 0.0) {
                    return Err(param("a", format!("power-law exponent must be positive, got {a}")));
                }
            }
            DecayProfile::Exponential { c } => {
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(param("c", format!("exponential rate must be nonnegative, got {c}")));
                }
            }
            DecayProfile::StretchedExp { c, alpha } => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(param("c", format!("stretched-exponential rate must be positive, got {c}")));
                }
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(param("alpha", format!("stretch exponent must lie in (0,1), got {alpha}")));
                }
            }
            DecayProfile::Product(fs) => {
                if fs.is_empty() {
                    return Err(param("factors", "product needs at least one factor"));
                }
                for f in fs {
                    f.validate()?;
                }
            }
            DecayProfile::Power { base, exponent } => {
                if !(exponent.is_finite() && *exponent > 0.0) {
                    return Err(param("exponent", format!("power exponent must be positive, got {exponent}")));
                }
                base.validate()?;
            }
        }
        Ok(())
    }

    /// ln β as a jet of the given order at x ≥ 1.
    pub fn ln_jet(&self, x: f64, order: usize) -> Jet {
        let v = Jet::variable(x, order);
        match self {
            DecayProfile::PowerLaw { a } => v.ln().scale(-a),
            DecayProfile::Exponential { c } => v.scale(-c),
            DecayProfile::StretchedExp { c, alpha } => v.powf(*alpha).scale(-c),
            DecayProfile::Product(fs) => {
                let mut acc = Jet::constant(0.0, order);
                for f in fs {
                    acc = &acc + &f.ln_jet(x, order);
                }
                acc
            }
            DecayProfile::Power { base, exponent } => base.ln_jet(x, order).scale(*exponent),
        }
    }

    /// β as a jet of the given order.
    pub fn jet(&self, x: f64, order: usize) -> Jet {
        self.ln_jet(x, order).exp()
    }

    pub fn ln_value(&self, x: f64) -> f64 {
        self.ln_jet(x, 0).value()
    }

    pub fn value(&self, x: f64) -> f64 {
        self.ln_value(x).exp()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.jet(x, 1).deriv(1)
    }

    /// Decided from the closed form: no exponential factor with positive rate.
    pub fn is_subexponential(&self) -> bool {
        match self {
            DecayProfile::PowerLaw { .. } | DecayProfile::StretchedExp { .. } => true,
            DecayProfile::Exponential { c } => *c == 0.0,
            DecayProfile::Product(fs) => fs.iter().all(|f| f.is_subexponential()),
            DecayProfile::Power { base, .. } => base.is_subexponential(),
        }
    }
}

/// Builds a profile from a kind name and flat parameter list.
pub fn make_profile(kind: &str, params: &[f64]) -> Result<DecayProfile> {
    let need = |n: usize| -> Result<()> {
        if params.len() != n {
            return Err(param("params", format!("{kind} takes {n} parameter(s), got {}", params.len())));
        }
        Ok(())
    };
    match kind {
        "PowerLaw" | "power_law" => {
            need(1)?;
            DecayProfile::power_law(params[0])
        }
        "Exponential" | "exponential" => {
            need(1)?;
            DecayProfile::exponential(params[0])
        }
        "StretchedExp" | "stretched_exp" => {
            need(2)?;
            DecayProfile::stretched_exp(params[0], params[1])
        }
        other => Err(param("kind", format!("unknown decay kind `{other}` (Product and Power compose existing profiles)"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayGrid {
    pub x_max: f64,
    pub points: usize,
    /// Pair grid is `pair_points`² pairs.
    pub pair_points: usize,
}

impl Default for DecayGrid {
    fn default() -> Self {
        DecayGrid { x_max: 1e3, points: 1000, pair_points: 100 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub c_const: f64,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub sup_x_beta: f64,
    /// Whether x·β(x) stops growing on the tail of the grid.
    pub x_beta_tail_bounded: bool,
    /// Raw grid infimum, clipped at 1.
    pub c_beta_estimate: f64,
    /// Estimate times the safety factor; use this downstream.
    pub c_beta: f64,
    pub envelope: Envelope,
    pub is_subexponential: bool,
}

/// Validates moderate decay on a sample grid and estimates C_β and the exponential envelope.
pub fn verify_moderate_decay(beta: &DecayProfile, grid: &DecayGrid) -> Result<DecayReport> {
    beta.validate()?;
    if grid.x_max < 100.0 || grid.points < 1000 || grid.pair_points * grid.pair_points < 10_000 {
        return Err(LabError::Input(format!(
            "decay grid too small: need x_max ≥ 100, ≥ 1000 points, ≥ 10⁴ pairs (got {}, {}, {})",
            grid.x_max,
            grid.points,
            grid.pair_points * grid.pair_points
        )));
    }
    let xs = geometric_grid(1.0, grid.x_max, grid.points);
    let ln_b: Vec<f64> = xs.iter().map(|x| beta.ln_value(*x)).collect();
    if let Some(i) = ln_b.iter().position(|v| !v.is_finite()) {
        return Err(LabError::Validation(format!("β not positive and finite at x = {}", xs[i])));
    }
    let bad: Vec<f64> = (1..xs.len()).filter(|&i| ln_b[i] > ln_b[i - 1] + 1e-12 * ln_b[i - 1].abs().max(1.0)).map(|i| xs[i]).collect();
    if !bad.is_empty() {
        return Err(LabError::Validation(format!("β increases on the grid at x = {:?}", &bad[..bad.len().min(10)])));
    }
    let ln_xb: Vec<f64> = xs.iter().zip(&ln_b).map(|(x, l)| x.ln() + l).collect();
    let sup_x_beta = ln_xb.iter().cloned().fold(f64::NEG_INFINITY, f64::max).exp();
    let x_beta_tail_bounded = tail_growth(&xs, &ln_xb).bounded;

    let ps = geometric_grid(1.0, grid.x_max, grid.pair_points);
    let lp: Vec<f64> = ps.iter().map(|x| beta.ln_value(*x)).collect();
    let mut ln_min = f64::INFINITY;
    for (i, x) in ps.iter().enumerate() {
        for (j, y) in ps.iter().enumerate().skip(i) {
            let r = beta.ln_value(x + y) - lp[i] - lp[j];
            ln_min = ln_min.min(r);
        }
    }
    let c_beta_estimate = ln_min.exp().min(1.0);
    if !(c_beta_estimate > 0.0) {
        return Err(LabError::Validation("C_β estimate is zero: β(x+y) ≥ C β(x)β(y) fails on the pair grid".into()));
    }
    let c_beta = C_BETA_SAFETY * c_beta_estimate;

    // β(x) ≥ β(1)·(C_β β(1))^x follows from iterating the product inequality.
    let b1 = beta.value(1.0);
    let rate = -(c_beta * b1).ln();
    let envelope = Envelope { c_const: b1, rate };
    for (x, l) in xs.iter().zip(&ln_b) {
        if *l < b1.ln() - rate * x - 1e-9 {
            return Err(LabError::Validation(format!("envelope β ≥ C e^(-cx) fails at x = {x}")));
        }
    }
    Ok(DecayReport { sup_x_beta, x_beta_tail_bounded, c_beta_estimate, c_beta, envelope, is_subexponential: beta.is_subexponential() })
}

/// A distance triple (d(x,q), d(y,q), d(x,y)).
pub type DistanceTriple = (f64, f64, f64);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotientCheck {
    pub pass: bool,
    /// Smallest log-margin to either bound (negative means violated).
    pub worst_margin: f64,
}

/// Checks C_β β(1+d_xy) ≤ β(1+d_xq)/β(1+d_yq) ≤ 1/(C_β β(1+d_xy)) on every triple.
pub fn check_quotient_bounds(beta: &DecayProfile, c_beta: f64, triples: &[DistanceTriple]) -> Result<QuotientCheck> {
    let mut worst = f64::INFINITY;
    for &(dxq, dyq, dxy) in triples {
        let tol = 1e-12 * (dxq + dyq + dxy).max(1.0);
        if dxq < 0.0 || dyq < 0.0 || dxy < 0.0 || (dxq - dyq).abs() > dxy + tol || dxy > dxq + dyq + tol {
            return Err(LabError::Input(format!("triple ({dxq}, {dyq}, {dxy}) violates the triangle inequality")));
        }
        let ln_ratio = beta.ln_value(1.0 + dxq) - beta.ln_value(1.0 + dyq);
        let ln_lower = c_beta.ln() + beta.ln_value(1.0 + dxy);
        let m = (ln_ratio - ln_lower).min(-ln_lower - ln_ratio);
        worst = worst.min(m);
    }
    Ok(QuotientCheck { pass: worst >= -1e-12, worst_margin: worst })
}
