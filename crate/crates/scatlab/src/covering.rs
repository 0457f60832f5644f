//! Greedy uniformly locally finite coverings of finite metric spaces and the
//! covering invariant κ_ε(s).

use crate::error::{LabError, Result};
use crate::numerics::fit::{fit_line, LineFit};
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Finite metric space with lazily evaluated distances.
pub trait MetricSpace: Sync {
    fn len(&self) -> usize;
    fn dist(&self, i: usize, j: usize) -> f64;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Explicit distance matrix.
#[derive(Clone, Debug)]
pub struct DenseMetric {
    d: DMatrix<f64>,
}

impl DenseMetric {
    /// Checks shape, zero diagonal, symmetry and nonnegativity.
    pub fn new(d: DMatrix<f64>) -> Result<Self> {
        if d.nrows() != d.ncols() {
            return Err(LabError::Input("distance matrix must be square".into()));
        }
        let n = d.nrows();
        for i in 0..n {
            if d[(i, i)] != 0.0 {
                return Err(LabError::Input(format!("nonzero diagonal entry at {i}")));
            }
            for j in 0..n {
                let v = d[(i, j)];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(LabError::Input(format!("invalid distance at ({i},{j})")));
                }
                if (v - d[(j, i)]).abs() > 1e-12 * v.max(1.0) {
                    return Err(LabError::Input(format!("asymmetric distance at ({i},{j})")));
                }
            }
        }
        Ok(DenseMetric { d })
    }
}

impl MetricSpace for DenseMetric {
    fn len(&self) -> usize {
        self.d.nrows()
    }
    fn dist(&self, i: usize, j: usize) -> f64 {
        self.d[(i, j)]
    }
}

#[derive(Clone, Debug)]
pub struct EuclideanCloud {
    pub points: Vec<Vec<f64>>,
}

impl MetricSpace for EuclideanCloud {
    fn len(&self) -> usize {
        self.points.len()
    }
    fn dist(&self, i: usize, j: usize) -> f64 {
        self.points[i].iter().zip(&self.points[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

/// Points of the hyperbolic plane (curvature −1) in geodesic polar coordinates.
#[derive(Clone, Debug)]
pub struct HyperbolicCloud {
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
}

impl HyperbolicCloud {
    /// `n` points uniform for hyperbolic area in the disk of radius `radius`, plus the origin first.
    pub fn sample<R: Rng>(n: usize, radius: f64, rng: &mut R) -> Self {
        let mut r = vec![0.0];
        let mut theta = vec![0.0];
        let c = radius.cosh() - 1.0;
        for _ in 1..n {
            let u: f64 = rng.gen();
            r.push(acosh_1p(u * c));
            theta.push(rng.gen::<f64>() * 2.0 * PI);
        }
        HyperbolicCloud { r, theta }
    }
}

/// acosh(1+t) without cancellation for small t.
fn acosh_1p(t: f64) -> f64 {
    (t + (t * (t + 2.0)).sqrt()).ln_1p()
}

impl MetricSpace for HyperbolicCloud {
    fn len(&self) -> usize {
        self.r.len()
    }
    fn dist(&self, i: usize, j: usize) -> f64 {
        let (r1, r2) = (self.r[i], self.r[j]);
        let s = (0.5 * (self.theta[i] - self.theta[j])).sin();
        // cosh d = cosh(r1−r2) + 2 sinh r1 sinh r2 sin²(Δθ/2)
        let t = ((r1 - r2).cosh() - 1.0) + 2.0 * r1.sinh() * r2.sinh() * s * s;
        acosh_1p(t.max(0.0))
    }
}

/// Points on a circle with arc-length distance.
#[derive(Clone, Debug)]
pub struct CircleCloud {
    pub circumference: f64,
    pub positions: Vec<f64>,
}

impl CircleCloud {
    pub fn uniform(circumference: f64, n: usize) -> Self {
        CircleCloud { circumference, positions: (0..n).map(|i| circumference * i as f64 / n as f64).collect() }
    }
}

impl MetricSpace for CircleCloud {
    fn len(&self) -> usize {
        self.positions.len()
    }
    fn dist(&self, i: usize, j: usize) -> f64 {
        let d = (self.positions[i] - self.positions[j]).abs().rem_euclid(self.circumference);
        d.min(self.circumference - d)
    }
}

/// Largest triangle-inequality violation d(i,k) − d(i,j) − d(j,k) over random triples.
pub fn audit_triangle<M: MetricSpace, R: Rng>(space: &M, samples: usize, rng: &mut R) -> f64 {
    let n = space.len();
    if n == 0 {
        return 0.0;
    }
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let (i, j, k) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
        worst = worst.max(space.dist(i, k) - space.dist(i, j) - space.dist(j, k));
    }
    worst
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub centers: Vec<usize>,
    pub radii: Vec<f64>,
    pub a: f64,
    /// Max over points of the number of dilated balls B_{a·h(x_i)}(x_i) containing it.
    pub multiplicity: usize,
    /// Max over centers of the number of dilated balls meeting its dilated ball at a sample point.
    pub overlap_degree: usize,
    /// min over center pairs of d(x_i,x_j)/min(h(x_i),h(x_j)); +∞ for fewer than two centers.
    pub separation: f64,
    pub covered: bool,
}

/// Greedy cover by open balls B_{h(x)}(x), nearest-first from point 0.
pub fn greedy_cover<M: MetricSpace>(space: &M, h: &[f64], a: f64) -> Result<CoverReport> {
    let n = space.len();
    if h.len() != n {
        return Err(LabError::Input(format!("radius function has {} values for {} points", h.len(), n)));
    }
    if !(a >= 1.0) {
        return Err(crate::error::param("a", "dilation factor must be at least 1"));
    }
    if let Some(i) = h.iter().position(|r| !(*r > 0.0)) {
        return Err(crate::error::param("h", format!("radius at point {i} is not positive")));
    }
    if n == 0 {
        return Ok(CoverReport { centers: vec![], radii: vec![], a, multiplicity: 0, overlap_degree: 0, separation: f64::INFINITY, covered: true });
    }
    let base_dist: Vec<f64> = (0..n).map(|i| space.dist(0, i)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| base_dist[i].total_cmp(&base_dist[j]).then(i.cmp(&j)));
    let mut centers: Vec<usize> = Vec::new();
    for &p in &order {
        if !centers.iter().any(|&c| space.dist(c, p) < h[c]) {
            centers.push(p);
        }
    }
    let radii: Vec<f64> = centers.iter().map(|&c| h[c]).collect();
    let covered = (0..n).into_par_iter().all(|p| centers.iter().any(|&c| space.dist(c, p) < h[c]));
    let separation = (0..centers.len())
        .into_par_iter()
        .map(|i| (i + 1..centers.len()).map(|j| space.dist(centers[i], centers[j]) / radii[i].min(radii[j])).fold(f64::INFINITY, f64::min))
        .reduce(|| f64::INFINITY, f64::min);
    let containing: Vec<Vec<usize>> =
        (0..n).into_par_iter().map(|p| (0..centers.len()).filter(|&i| space.dist(centers[i], p) < a * radii[i]).collect()).collect();
    let multiplicity = containing.iter().map(|c| c.len()).max().unwrap_or(0);
    let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); centers.len()];
    for list in &containing {
        for &i in list {
            neighbours[i].extend_from_slice(list);
        }
    }
    let overlap_degree = neighbours
        .into_iter()
        .map(|mut v| {
            v.sort_unstable();
            v.dedup();
            v.len()
        })
        .max()
        .unwrap_or(0);
    Ok(CoverReport { centers, radii, a, multiplicity, overlap_degree, separation, covered })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaEstimate {
    pub s: f64,
    pub eps: f64,
    /// Upper bound for κ_ε(s) realized by `witness`.
    pub kappa: usize,
    pub witness: Vec<usize>,
}

/// Greedy (s−ε)-cover and the max number of its (3s+ε)-balls containing a point.
pub fn kappa_estimate<M: MetricSpace>(space: &M, s: f64, eps: f64) -> Result<KappaEstimate> {
    if !(eps >= 0.0) || !(s > eps) {
        return Err(LabError::Input(format!("need s > ε ≥ 0 (got s={s}, ε={eps})")));
    }
    let h = vec![s - eps; space.len()];
    let cover = greedy_cover(space, &h, 1.0)?;
    let big = 3.0 * s + eps;
    let kappa = (0..space.len()).into_par_iter().map(|p| cover.centers.iter().filter(|&&c| space.dist(c, p) < big).count()).max().unwrap_or(0);
    Ok(KappaEstimate { s, eps, kappa, witness: cover.centers })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaGrowth {
    pub estimates: Vec<KappaEstimate>,
    pub fit: LineFit,
    /// Smallest constant with log κ(s) ≤ slope·s + c on all samples.
    pub envelope_const: f64,
}

/// log κ(s) against s with a linear upper envelope.
pub fn kappa_growth<M: MetricSpace>(space: &M, s_values: &[f64], eps: f64) -> Result<KappaGrowth> {
    let estimates = s_values.iter().map(|&s| kappa_estimate(space, s, eps)).collect::<Result<Vec<_>>>()?;
    let ln_k: Vec<f64> = estimates.iter().map(|e| (e.kappa as f64).ln()).collect();
    let fit = fit_line(s_values, &ln_k);
    let envelope_const = s_values.iter().zip(&ln_k).map(|(s, l)| l - fit.slope * s).fold(f64::NEG_INFINITY, f64::max);
    Ok(KappaGrowth { estimates, fit, envelope_const })
}

/// Packing bound for the multiplicity of a-dilated h-balls in a space with
/// volume bounds: vol B_{(2a+1)h}/vol B_{h/2} for curvature −K in dimension n.
pub fn packing_multiplicity_bound(a: f64, h: f64, k: f64, n: usize) -> Result<f64> {
    let outer = crate::geometry::gunther_bishop_volume((2.0 * a + 1.0) * h, k, n)?.upper;
    let inner = crate::geometry::gunther_bishop_volume(0.5 * h, 0.0, n)?.upper;
    Ok(outer / inner)
}
