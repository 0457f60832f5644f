//! Experiment configuration files (TOML, one experiment per file).

use crate::decay::DecayProfile;
use crate::error::{LabError, Result};
use crate::geometry::WarpedMetric;
use crate::operators::{EndModel, Formulation, GridSpec, Perturbation};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use super::catalog::Kind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; must match the kind given on the command line.
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default, rename = "equiv-check")]
    pub equiv_check: Option<EquivCheck>,
    #[serde(default)]
    pub cover: Option<Cover>,
    #[serde(default)]
    pub spectrum: Option<Spectrum>,
    #[serde(default)]
    pub propagate: Option<Propagate>,
    #[serde(default, rename = "opnorm-growth")]
    pub opnorm_growth: Option<OpnormGrowth>,
    #[serde(default, rename = "heat-trace")]
    pub heat_trace: Option<HeatTrace>,
    #[serde(default, rename = "wave-op")]
    pub wave_op: Option<WaveOp>,
    #[serde(default)]
    pub smatrix: Option<Smatrix>,
    #[serde(default, rename = "resolvent-cont")]
    pub resolvent_cont: Option<ResolventCont>,
    #[serde(default)]
    pub hypotheses: Option<Hypotheses>,
}

fn log_x() -> Formulation {
    Formulation::LogX
}

/// End model, mode and grid shared by the operator pipelines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSetup {
    pub end: EndModel,
    #[serde(default)]
    pub mode: usize,
    pub grid: GridSpec,
    #[serde(default = "log_x")]
    pub formulation: Formulation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivCheck {
    #[serde(default = "d_triples")]
    pub triples: usize,
    #[serde(default = "d_k")]
    pub k: usize,
    #[serde(default = "d_xmax")]
    pub x_max: f64,
    #[serde(default = "d_points")]
    pub points: usize,
}
fn d_triples() -> usize {
    20
}
fn d_k() -> usize {
    2
}
fn d_xmax() -> f64 {
    1e3
}
fn d_points() -> usize {
    300
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cover {
    pub points: usize,
    pub radius: f64,
    pub h: f64,
    #[serde(default = "d_a")]
    pub a: f64,
    #[serde(default)]
    pub kappa_s: Vec<f64>,
    #[serde(default = "d_eps")]
    pub kappa_eps: f64,
}
fn d_a() -> f64 {
    2.0
}
fn d_eps() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spectrum {
    #[serde(flatten)]
    pub setup: ModeSetup,
    #[serde(default = "d_count")]
    pub count: usize,
}
fn d_count() -> usize {
    10
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Spectral,
    Leapfrog,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Propagate {
    #[serde(flatten)]
    pub setup: ModeSetup,
    pub x0: f64,
    pub delta: f64,
    pub s: f64,
    #[serde(default = "d_method")]
    pub method: MethodName,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "d_leak")]
    pub leakage_tol: f64,
}
fn d_method() -> MethodName {
    MethodName::Leapfrog
}
fn d_leak() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpnormGrowth {
    #[serde(flatten)]
    pub setup: ModeSetup,
    pub beta: DecayProfile,
    pub s_max: f64,
    #[serde(default = "d_spoints")]
    pub s_points: usize,
    #[serde(default = "d_resid")]
    pub residual_tol: f64,
}
fn d_spoints() -> usize {
    21
}
fn d_resid() -> f64 {
    0.2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatTrace {
    pub end: EndModel,
    #[serde(default)]
    pub mode: usize,
    #[serde(default = "log_x")]
    pub formulation: Formulation,
    #[serde(default)]
    pub x_min: f64,
    pub dx: f64,
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
    pub t: f64,
    pub lengths: Vec<f64>,
    #[serde(default = "d_stab")]
    pub stability_tol: f64,
}
fn d_stab() -> f64 {
    0.01
}

/// Free cusp model in log coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CuspModel {
    pub n: usize,
    pub x_max: f64,
    pub points: usize,
    #[serde(default = "d_lmax")]
    pub lambda_max: f64,
    #[serde(default = "d_lpoints")]
    pub lambda_points: usize,
}
fn d_lmax() -> f64 {
    8.0
}
fn d_lpoints() -> usize {
    801
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveOp {
    pub model: CuspModel,
    pub perturbation: Perturbation,
    pub lambda0: f64,
    pub sigma: f64,
    pub times: Vec<f64>,
    #[serde(default = "d_iso")]
    pub isometry_tol: f64,
}
fn d_iso() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Smatrix {
    pub n: usize,
    pub perturbation: Perturbation,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_points: usize,
    #[serde(default = "d_unit")]
    pub unitarity_tol: f64,
    #[serde(default = "d_oracle")]
    pub oracle_tol: f64,
}
fn d_unit() -> f64 {
    1e-10
}
fn d_oracle() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolventCont {
    pub n: usize,
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
    pub re: [f64; 2],
    pub im: [f64; 2],
    #[serde(default = "d_scan")]
    pub n_re: usize,
    #[serde(default = "d_scan")]
    pub n_im: usize,
    #[serde(default = "d_panel")]
    pub panel_len: f64,
    #[serde(default = "d_order")]
    pub order: usize,
    #[serde(default = "d_cand")]
    pub candidate_threshold: f64,
}
fn d_scan() -> usize {
    100
}
fn d_panel() -> f64 {
    0.5
}
fn d_order() -> usize {
    16
}
fn d_cand() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hypotheses {
    pub beta: DecayProfile,
    pub a: f64,
    pub b: f64,
    pub metric: WarpedMetric,
    #[serde(default)]
    pub base_point: f64,
}

fn bad(path: &str, reason: impl Into<String>) -> LabError {
    LabError::Config { path: path.to_string(), reason: reason.into() }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(path, format!("must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(&path.display().to_string(), e.to_string()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let span = e.span().map(|s| format!("bytes {}..{}", s.start, s.end)).unwrap_or_else(|| "document".into());
            bad(&span, e.message().to_string())
        })
    }

    /// Checks the section for `kind` is present and its tolerances are positive.
    pub fn validate(&self, kind: Kind) -> Result<()> {
        if let Some(k) = &self.kind {
            if k != kind.name() {
                return Err(bad("kind", format!("config is for `{k}` but `{}` was requested", kind.name())));
            }
        }
        let sec = kind.name();
        let missing = || bad(sec, "section missing");
        match kind {
            Kind::EquivCheck => {
                let c = self.equiv_check.as_ref().ok_or_else(missing)?;
                positive(&format!("{sec}.x_max"), c.x_max)?;
                if c.points < 8 || c.triples == 0 {
                    return Err(bad(sec, "need points ≥ 8 and triples ≥ 1"));
                }
            }
            Kind::Cover => {
                let c = self.cover.as_ref().ok_or_else(missing)?;
                positive(&format!("{sec}.radius"), c.radius)?;
                positive(&format!("{sec}.h"), c.h)?;
                positive(&format!("{sec}.kappa_eps"), c.kappa_eps)?;
            }
            Kind::Spectrum => {
                self.spectrum.as_ref().ok_or_else(missing)?;
            }
            Kind::Propagate => {
                let c = self.propagate.as_ref().ok_or_else(missing)?;
                positive(&format!("{sec}.delta"), c.delta)?;
                positive(&format!("{sec}.s"), c.s)?;
                positive(&format!("{sec}.leakage_tol"), c.leakage_tol)?;
                if let Some(dt) = c.dt {
                    positive(&format!("{sec}.dt"), dt)?;
                }
            }
            Kind::OpnormGrowth => {
                let c = self.opnorm_growth.as_ref().ok_or_else(missing)?;
                positive(&format!("{sec}.s_max"), c.s_max)?;
                positive(&format!("{sec}.residual_tol"), c.residual_tol)?;
            }
            Kind::HeatTrace => {
                let c = self.heat_trace.as_ref().ok_or_else(missing)?;
                positive(&format!("{sec}.dx"), c.dx)?;
                positive(&format!("{sec}.t"), c.t)?;
                positive(&format!("{sec}.stability_tol"), c.stability_tol)?;
                if c.lengths.is_empty() {
                    return Err(bad(&format!("{sec}.lengths"), "need at least one length"));
                }
            }
            Kind::WaveOp => {
                let c = self.wave_op.as_ref().ok_or_else(missing)?;
                positive(&format!("{sec}.sigma"), c.sigma)?;
                positive(&format!("{sec}.isometry_tol"), c.isometry_tol)?;
            }
            Kind::Smatrix => {
                let c = self.smatrix.as_ref().ok_or_else(missing)?;
                positive(&format!("{sec}.unitarity_tol"), c.unitarity_tol)?;
                positive(&format!("{sec}.oracle_tol"), c.oracle_tol)?;
                positive(&format!("{sec}.lambda_min"), c.lambda_min)?;
                if !(c.lambda_max > c.lambda_min) || c.lambda_points < 2 {
                    return Err(bad(sec, "need lambda_max > lambda_min and lambda_points ≥ 2"));
                }
            }
            Kind::ResolventCont => {
                let c = self.resolvent_cont.as_ref().ok_or_else(missing)?;
                positive(&format!("{sec}.panel_len"), c.panel_len)?;
                positive(&format!("{sec}.candidate_threshold"), c.candidate_threshold)?;
            }
            Kind::Hypotheses => {
                let c = self.hypotheses.as_ref().ok_or_else(missing)?;
                c.metric.validate().map_err(|e| bad(&format!("{sec}.metric"), e.to_string()))?;
            }
        }
        Ok(())
    }
}
