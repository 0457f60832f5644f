use lab::cli::catalog::{list_experiments, unknown_kind_message, Kind};
use lab::continuation::{resonance_scan as scan, ScanWindow, SupportDiscretization};
use lab::covering::{greedy_cover, HyperbolicCloud};
use lab::decay::{verify_moderate_decay, DecayGrid};
use lab::error::LabError;
use lab::funcalc::{cosine_propagator, heat_apply, PropagatorMethod, SpectralDecomposition};
use lab::operators::{build_mode_operator, BaseCoefficients, Coefficients, DiscreteOperator, EndModel, Formulation, GridSpec, Perturbation};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::PathBuf;

fn err(e: LabError) -> PyErr {
    match e {
        LabError::Refused(_) | LabError::Numerical(_) | LabError::Capability(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Converts a serializable report into plain Python dicts and lists.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Positive non-increasing weight β on [1, ∞).
#[pyclass(name = "DecayProfile", frozen)]
struct PyDecayProfile {
    inner: lab::decay::DecayProfile,
}

#[pymethods]
impl PyDecayProfile {
    #[staticmethod]
    fn power_law(a: f64) -> PyResult<Self> {
        Ok(PyDecayProfile { inner: lab::decay::DecayProfile::power_law(a).map_err(err)? })
    }

    #[staticmethod]
    fn exponential(c: f64) -> PyResult<Self> {
        Ok(PyDecayProfile { inner: lab::decay::DecayProfile::exponential(c).map_err(err)? })
    }

    #[staticmethod]
    fn stretched_exp(c: f64, alpha: f64) -> PyResult<Self> {
        Ok(PyDecayProfile { inner: lab::decay::DecayProfile::stretched_exp(c, alpha).map_err(err)? })
    }

    fn __call__(&self, x: f64) -> f64 {
        self.inner.value(x)
    }

    /// Moderate-decay report on the default grid.
    fn verify(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &verify_moderate_decay(&self.inner, &DecayGrid::default()).map_err(err)?)
    }

    fn __repr__(&self) -> String {
        format!("DecayProfile({:?})", self.inner)
    }
}

/// One mode of the Laplacian on a cusp or cylinder end, discretized on a uniform grid.
#[pyclass(name = "ModeOperator", frozen)]
struct PyModeOperator {
    inner: DiscreteOperator,
}

fn formulation(name: &str) -> PyResult<Formulation> {
    match name {
        "log_x" => Ok(Formulation::LogX),
        "cusp_u" => Ok(Formulation::CuspU),
        _ => Err(PyValueError::new_err(format!("unknown formulation `{name}` (log_x or cusp_u)"))),
    }
}

#[pymethods]
impl PyModeOperator {
    /// Cusp over the flat n-torus.
    #[staticmethod]
    #[pyo3(signature = (n, x_max, points, mode = 0, formulation = "log_x"))]
    fn cusp(n: usize, x_max: f64, points: usize, mode: usize, formulation: &str) -> PyResult<Self> {
        let end = EndModel::flat_torus_cusp(n, mode + 1).map_err(err)?;
        let f = self::formulation(formulation)?;
        let x_min = if f == Formulation::CuspU { 1.0 } else { 0.0 };
        Ok(PyModeOperator { inner: build_mode_operator(&end, mode, &GridSpec::uniform(x_min, x_max, points), f).map_err(err)? })
    }

    /// Cylinder over a circle of length 2π.
    #[staticmethod]
    #[pyo3(signature = (length, points, mode = 0))]
    fn cylinder(length: f64, points: usize, mode: usize) -> PyResult<Self> {
        let end = EndModel::circle_cylinder(mode + 1).map_err(err)?;
        Ok(PyModeOperator { inner: build_mode_operator(&end, mode, &GridSpec::uniform(0.0, length, points), Formulation::LogX).map_err(err)? })
    }

    /// Copy with q shifted by a square well of `depth` on the first `width` units.
    fn with_square_well(&self, depth: f64, width: f64) -> PyResult<Self> {
        let (h, _) = lab::operators::perturb_operator(&self.inner, &Perturbation::SquareWell { depth, width }).map_err(err)?;
        Ok(PyModeOperator { inner: h })
    }

    /// Copy with p, w, q perturbed along the envelope β(1 + distance).
    #[pyo3(signature = (beta, eps_p = 0.0, eps_w = 0.0, eps_q = 0.0))]
    fn with_envelope(&self, beta: &PyDecayProfile, eps_p: f64, eps_w: f64, eps_q: f64) -> PyResult<Self> {
        let pert = Perturbation::Envelope { beta: beta.inner.clone(), eps_p, eps_w, eps_q };
        let (h, _) = lab::operators::perturb_operator(&self.inner, &pert).map_err(err)?;
        Ok(PyModeOperator { inner: h })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Interior nodes.
    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes().to_vec()
    }

    fn apply(&self, f: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check(&f)?;
        Ok(self.inner.apply(&f))
    }

    #[pyo3(signature = (count = None))]
    fn eigenvalues(&self, count: Option<usize>) -> PyResult<Vec<f64>> {
        let mut ev = self.inner.eigenvalues().map_err(err)?;
        if let Some(c) = count {
            ev.truncate(c);
        }
        Ok(ev)
    }

    fn heat(&self, f: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
        self.check(&f)?;
        let sd = SpectralDecomposition::new(&self.inner).map_err(err)?;
        heat_apply(&sd, t, &f).map_err(err)
    }

    /// cos(s√A)f by leapfrog (default) or spectral evaluation.
    #[pyo3(signature = (f, s, method = "leapfrog"))]
    fn wave(&self, f: Vec<f64>, s: f64, method: &str) -> PyResult<Vec<f64>> {
        self.check(&f)?;
        let r = match method {
            "leapfrog" => cosine_propagator(&self.inner, &f, s, PropagatorMethod::Leapfrog { dt: None }, None),
            "spectral" => {
                let sd = SpectralDecomposition::new(&self.inner).map_err(err)?;
                cosine_propagator(&self.inner, &f, s, PropagatorMethod::Spectral, Some(&sd))
            }
            _ => return Err(PyValueError::new_err(format!("unknown method `{method}` (leapfrog or spectral)"))),
        };
        Ok(r.map_err(err)?.values)
    }

    fn norm(&self, f: Vec<f64>) -> PyResult<f64> {
        self.check(&f)?;
        Ok(self.inner.norm(&f))
    }
}

impl PyModeOperator {
    fn check(&self, f: &[f64]) -> PyResult<()> {
        if f.len() != self.inner.len() {
            return Err(PyValueError::new_err(format!("expected {} values, got {}", self.inner.len(), f.len())));
        }
        Ok(())
    }
}

fn well(n: usize, depth: f64, width: f64) -> Coefficients {
    Coefficients {
        base: BaseCoefficients::LogX { n, lambda: 0.0 },
        x_min: 0.0,
        perturbation: (depth != 0.0).then_some(Perturbation::SquareWell { depth, width }),
    }
}

/// Phase shifts δ(λ) and S(λ) = e^{2iδ} of a square well in the mode-0 cusp channel.
#[pyfunction]
fn smatrix(n: usize, depth: f64, width: f64, lambdas: Vec<f64>) -> PyResult<(Vec<f64>, Vec<Complex64>)> {
    let r = lab::scattering::smatrix_stationary(&well(n, depth, width), &lambdas).map_err(err)?;
    let s = (0..lambdas.len()).map(|k| r.s(k)).collect();
    Ok((r.delta, s))
}

/// Closed-form square-well phase shift reduced to (−π/2, π/2].
#[pyfunction]
fn square_well_phase(lambda: f64, depth: f64, width: f64) -> f64 {
    lab::scattering::square_well_phase(lambda, depth, width)
}

/// Second-sheet poles z of a square well in the window re × im of the momentum plane.
#[pyfunction]
#[pyo3(signature = (n, depth, width, re, im, grid = (60, 40), panel_len = 0.5, order = 16, threshold = 0.5))]
#[allow(clippy::too_many_arguments)]
fn resonances(
    n: usize,
    depth: f64,
    width: f64,
    re: (f64, f64),
    im: (f64, f64),
    grid: (usize, usize),
    panel_len: f64,
    order: usize,
    threshold: f64,
) -> PyResult<Vec<Complex64>> {
    let disc = SupportDiscretization::new(&well(n, depth, width), panel_len, order).map_err(err)?;
    let window = ScanWindow { re, im, n_re: grid.0, n_im: grid.1 };
    Ok(scan(&disc, &window, threshold).map_err(err)?.poles.iter().map(|p| p.z).collect())
}

/// Greedy cover of `points` random samples of a hyperbolic disk of `radius` by h-balls.
#[pyfunction]
#[pyo3(signature = (points, radius, h, a = 2.0, seed = 0))]
fn hyperbolic_cover(py: Python<'_>, points: usize, radius: f64, h: f64, a: f64, seed: u64) -> PyResult<Py<PyAny>> {
    let cloud = HyperbolicCloud::sample(points, radius, &mut ChaCha8Rng::seed_from_u64(seed));
    to_py(py, &greedy_cover(&cloud, &vec![h; points], a).map_err(err)?)
}

/// Runs a config-driven experiment and returns its record.
#[pyfunction]
#[pyo3(signature = (kind, config, out = None))]
fn run_experiment(py: Python<'_>, kind: &str, config: PathBuf, out: Option<PathBuf>) -> PyResult<Py<PyAny>> {
    let k = Kind::parse(kind).ok_or_else(|| PyValueError::new_err(unknown_kind_message(kind)))?;
    let record = py.detach(|| lab::cli::run_experiment(k, &config, out.as_deref())).map_err(err)?;
    to_py(py, &record)
}

#[pyfunction]
fn experiments(py: Python<'_>) -> PyResult<Py<PyAny>> {
    to_py(py, &list_experiments())
}

#[pymodule]
fn scatlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDecayProfile>()?;
    m.add_class::<PyModeOperator>()?;
    m.add_function(wrap_pyfunction!(smatrix, m)?)?;
    m.add_function(wrap_pyfunction!(square_well_phase, m)?)?;
    m.add_function(wrap_pyfunction!(resonances, m)?)?;
    m.add_function(wrap_pyfunction!(hyperbolic_cover, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(experiments, m)?)?;
    Ok(())
}
