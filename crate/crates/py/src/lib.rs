//! Python bindings: operators and measures, the action minimizer, the
//! regularized vacuum kernel, the lattice Jacobson check and the power
//! counting relations.
//!
//! Matrices cross the boundary as nested lists of Python `complex`.

use std::collections::BTreeMap;

use cfslab_core::error::CfsError as CoreError;
use cfslab_core::lattice::{Density, Embedding, Field, LatticeBackground, LatticeChart, Region};
use cfslab_core::linalg::{CMatrix, C64};
use cfslab_core::measure::{self, DiscreteMeasure, MultiplierSet};
use cfslab_core::minimizer::{self, MinimizeConfig};
use cfslab_core::operator::{self, KernelParams};
use cfslab_core::scaling::{self, Bindings, Regime, Relation};
use cfslab_core::surface::{jacobson_check, JacobsonTolerances, SurfaceConfig};
use cfslab_core::vacuum::{self, QuadConfig, RegParams, Separation};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(cfslab, CfsError, PyException, "Numerical or input failure in the core library.");
create_exception!(cfslab, NonConvergence, CfsError, "An iterative solver stopped before its tolerance.");

fn err(e: CoreError) -> PyErr {
    match e {
        CoreError::NonConvergence(_) => NonConvergence::new_err(e.to_string()),
        _ => CfsError::new_err(e.to_string()),
    }
}

fn to_matrix(rows: Vec<Vec<C64>>) -> PyResult<CMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err(format!("expected a square {n}x{n} matrix")));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn from_matrix(m: &CMatrix) -> Vec<Vec<C64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn separation_name(s: Separation) -> &'static str {
    match s {
        Separation::Timelike => "timelike",
        Separation::Spacelike => "spacelike",
        Separation::Boundary => "boundary",
    }
}

/// Self-adjoint operator of rank at most `2 * spin_dim` with at most
/// `spin_dim` positive and `spin_dim` negative eigenvalues.
#[pyclass(name = "Operator", module = "cfslab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyOperator(operator::Operator);

#[pymethods]
impl PyOperator {
    #[new]
    fn new(matrix: Vec<Vec<C64>>, spin_dim: usize) -> PyResult<Self> {
        Ok(Self(operator::Operator::new(to_matrix(matrix)?, spin_dim).map_err(err)?))
    }

    #[staticmethod]
    fn diagonal(entries: Vec<f64>, spin_dim: usize) -> PyResult<Self> {
        Ok(Self(operator::Operator::diagonal(&entries, spin_dim).map_err(err)?))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn spin_dim(&self) -> usize {
        self.0.spin_dim()
    }

    fn trace(&self) -> f64 {
        self.0.trace()
    }

    fn matrix(&self) -> Vec<Vec<C64>> {
        from_matrix(self.0.matrix())
    }

    /// Eigenvalues, ascending.
    fn eigenvalues(&self) -> Vec<f64> {
        self.0.prepare().values().to_vec()
    }

    fn scaled(&self, factor: f64) -> PyResult<Self> {
        Ok(Self(self.0.scaled(factor).map_err(err)?))
    }

    fn __repr__(&self) -> String {
        format!("Operator(dim={}, spin_dim={}, trace={:e})", self.0.dim(), self.0.spin_dim(), self.0.trace())
    }
}

/// Weighted finite support of operators.
#[pyclass(name = "Measure", module = "cfslab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMeasure(DiscreteMeasure);

#[pymethods]
impl PyMeasure {
    #[new]
    fn new(points: Vec<PyRef<'_, PyOperator>>, weights: Vec<f64>) -> PyResult<Self> {
        let points = points.iter().map(|p| p.0.clone()).collect();
        Ok(Self(DiscreteMeasure::new(points, weights).map_err(err)?))
    }

    /// Equal weights on `count` random regular points of fixed trace.
    #[staticmethod]
    #[pyo3(signature = (f, spin_dim, count, trace = 0.0, volume = 1.0, seed = 0))]
    fn random(f: usize, spin_dim: usize, count: usize, trace: f64, volume: f64, seed: u64) -> PyResult<Self> {
        Ok(Self(minimizer::random_measure(f, spin_dim, count, trace, volume, seed).map_err(err)?))
    }

    /// Parses the text format; returns the measure and its trace constant.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<(Self, f64)> {
        let (m, c) = DiscreteMeasure::from_text(text).map_err(err)?;
        Ok((Self(m), c))
    }

    fn to_text(&self, trace_c: f64) -> String {
        self.0.to_text(trace_c)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn points(&self) -> Vec<PyOperator> {
        self.0.points().iter().cloned().map(PyOperator).collect()
    }

    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    #[pyo3(signature = (kappa = 0.0))]
    fn action(&self, kappa: f64) -> PyResult<f64> {
        measure::causal_action(&self.0, &KernelParams::with_kappa(kappa)).map_err(err)
    }

    /// Volume, trace integral and boundedness functional.
    fn constraints(&self) -> PyResult<BTreeMap<&'static str, f64>> {
        let c = measure::constraint_values(&self.0).map_err(err)?;
        Ok(BTreeMap::from([("volume", c.volume), ("trace_integral", c.trace_integral), ("boundedness", c.boundedness)]))
    }

    fn rescaled(&self, lam: f64, sigma: f64) -> PyResult<Self> {
        Ok(Self(self.0.rescaled(lam, sigma).map_err(err)?))
    }

    fn __repr__(&self) -> String {
        format!("Measure(len={}, dim={:?})", self.0.len(), self.0.dim())
    }
}

/// Lagrange multipliers of a critical measure.
#[pyclass(name = "Multipliers", module = "cfslab", frozen, skip_from_py_object, get_all)]
#[derive(Clone)]
struct PyMultipliers {
    kappa: f64,
    s_param: f64,
    trace_c: f64,
}

impl PyMultipliers {
    fn core(&self) -> PyResult<MultiplierSet> {
        MultiplierSet::new(self.kappa, self.s_param, self.trace_c).map_err(err)
    }
}

#[pymethods]
impl PyMultipliers {
    #[new]
    fn new(kappa: f64, s_param: f64, trace_c: f64) -> PyResult<Self> {
        MultiplierSet::new(kappa, s_param, trace_c).map_err(err)?;
        Ok(Self { kappa, s_param, trace_c })
    }

    fn __repr__(&self) -> String {
        format!("Multipliers(kappa={:e}, s_param={:e}, trace_c={:e})", self.kappa, self.s_param, self.trace_c)
    }
}

impl From<MultiplierSet> for PyMultipliers {
    fn from(m: MultiplierSet) -> Self {
        Self { kappa: m.kappa, s_param: m.s_param, trace_c: m.trace_c }
    }
}

#[pyfunction]
#[pyo3(signature = (x, y, kappa = 0.0))]
fn lagrangian(x: PyRef<'_, PyOperator>, y: PyRef<'_, PyOperator>, kappa: f64) -> PyResult<f64> {
    operator::lagrangian(&x.0, &y.0, &KernelParams::with_kappa(kappa)).map_err(err)
}

#[pyfunction]
fn spectral_weight(x: PyRef<'_, PyOperator>, y: PyRef<'_, PyOperator>) -> PyResult<f64> {
    operator::spectral_weight(&x.0, &y.0, &KernelParams::with_kappa(0.0)).map_err(err)
}

/// Nonzero eigenvalues of `xy`, ordered by modulus descending.
#[pyfunction]
fn product_spectrum(x: PyRef<'_, PyOperator>, y: PyRef<'_, PyOperator>) -> PyResult<Vec<C64>> {
    Ok(operator::product_spectrum(&x.0, &y.0).map_err(err)?.eigenvalues)
}

/// Minimizes the causal action from `init`. Returns the final measure, its
/// multipliers and a report dict; raises `NonConvergence` only when
/// `strict` is set.
#[pyfunction]
#[pyo3(signature = (
    init, *, volume = 1.0, trace = 0.0, kappa = 0.0, max_iters = 2000, tol_grad = 1e-9,
    optimize_positions = true, boundedness_bound = None, seed = 0, strict = false
))]
#[allow(clippy::too_many_arguments)]
fn minimize(
    py: Python<'_>,
    init: PyRef<'_, PyMeasure>,
    volume: f64,
    trace: f64,
    kappa: f64,
    max_iters: usize,
    tol_grad: f64,
    optimize_positions: bool,
    boundedness_bound: Option<f64>,
    seed: u64,
    strict: bool,
) -> PyResult<(PyMeasure, PyMultipliers, BTreeMap<&'static str, Py<PyAny>>)> {
    let cfg = MinimizeConfig {
        volume_target: volume,
        trace_target: trace,
        kappa,
        max_iters,
        tol_grad,
        optimize_positions,
        boundedness_bound,
        seed,
        ..MinimizeConfig::default()
    };
    let rho = init.0.clone();
    let (rho, mult, report) = py.detach(|| minimizer::minimize_action(&rho, &cfg)).map_err(err)?;
    if strict && !report.converged {
        return Err(NonConvergence::new_err(format!(
            "stopped after {} iterations; position stationarity {:e}",
            report.iterations, report.position_stationarity
        )));
    }
    let actions: Vec<f64> = report.history.iter().map(|r| r.action).collect();
    let out = BTreeMap::from([
        ("iterations", report.iterations.into_pyobject(py)?.into_any().unbind()),
        ("converged", report.converged.into_pyobject(py)?.to_owned().into_any().unbind()),
        ("weight_stationarity", report.weight_stationarity.into_pyobject(py)?.into_any().unbind()),
        ("position_stationarity", report.position_stationarity.into_pyobject(py)?.into_any().unbind()),
        ("actions", actions.into_pyobject(py)?.into_any().unbind()),
    ]);
    Ok((PyMeasure(rho), mult.into(), out))
}

/// Support residual, sampled exterior violation and constraint violations.
#[pyfunction]
#[pyo3(signature = (rho, mult, volume = 1.0, seed = 0))]
fn criticality(
    rho: PyRef<'_, PyMeasure>,
    mult: PyRef<'_, PyMultipliers>,
    volume: f64,
    seed: u64,
) -> PyResult<BTreeMap<&'static str, f64>> {
    let m = mult.core()?;
    let cfg = MinimizeConfig {
        volume_target: volume,
        trace_target: m.trace_c,
        kappa: m.kappa,
        seed,
        ..MinimizeConfig::default()
    };
    let r = minimizer::criticality_report(&rho.0, &m, &cfg).map_err(err)?;
    Ok(BTreeMap::from([
        ("support_residual", r.support_residual),
        ("exterior_violation", r.exterior_violation),
        ("spread", r.spread),
        ("volume_violation", r.volume_violation),
        ("trace_violation", r.trace_violation),
        ("boundedness_violation", r.boundedness_violation),
    ]))
}

/// Regularization: `epsilon` the cutoff length, `mass`, `lam` the overall
/// rescaling and `delta >= epsilon` the Planck length.
#[pyclass(name = "Regularization", module = "cfslab", frozen, skip_from_py_object, get_all)]
#[derive(Clone)]
struct PyReg {
    epsilon: f64,
    mass: f64,
    lam: f64,
    delta: f64,
}

impl PyReg {
    fn core(&self) -> RegParams {
        RegParams { epsilon: self.epsilon, mass: self.mass, lambda: self.lam, delta: self.delta }
    }
}

#[pymethods]
impl PyReg {
    #[new]
    #[pyo3(signature = (epsilon, mass, lam = 1.0, delta = None))]
    fn new(epsilon: f64, mass: f64, lam: f64, delta: Option<f64>) -> PyResult<Self> {
        let delta = delta.unwrap_or(epsilon);
        RegParams::new(epsilon, mass, lam, delta).map_err(err)?;
        Ok(Self { epsilon, mass, lam, delta })
    }

    /// Kernel at separation `xi = (t, x, y, z)` as a 4x4 spinor matrix.
    fn kernel(&self, py: Python<'_>, xi: [f64; 4]) -> PyResult<Vec<Vec<C64>>> {
        let p = self.core();
        Ok(from_matrix(&py.detach(|| vacuum::kernel_p(&xi, &p, &QuadConfig::default())).map_err(err)?))
    }

    fn local_trace(&self, py: Python<'_>) -> PyResult<f64> {
        let p = self.core();
        py.detach(|| vacuum::local_trace(&p, &QuadConfig::default())).map_err(err)
    }

    fn chain_eigenvalues(&self, py: Python<'_>, xi: [f64; 4]) -> PyResult<Vec<C64>> {
        let p = self.core();
        py.detach(|| vacuum::chain_eigenvalues(&xi, &p, &QuadConfig::default())).map_err(err)
    }

    /// "timelike", "spacelike" or "boundary".
    #[pyo3(signature = (xi, band = 1e-6))]
    fn classify(&self, py: Python<'_>, xi: [f64; 4], band: f64) -> PyResult<&'static str> {
        let p = self.core();
        let s = py.detach(|| vacuum::chain_classify(&xi, &p, &QuadConfig::default(), band)).map_err(err)?;
        Ok(separation_name(s))
    }

    #[pyo3(signature = (band = 1e-6))]
    fn cylinder_radius(&self, py: Python<'_>, band: f64) -> PyResult<f64> {
        let p = self.core();
        py.detach(|| vacuum::cylinder_radius(&p, &QuadConfig::default(), band)).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Regularization(epsilon={:e}, mass={:e}, lam={:e}, delta={:e})",
            self.epsilon, self.mass, self.lam, self.delta
        )
    }
}

/// Log-log slopes of the local trace, chain modulus and origin Lagrangian
/// against `epsilon`.
#[pyfunction]
#[pyo3(signature = (reg, epsilons, min_r_squared = 0.999))]
fn scaling_sweep(
    py: Python<'_>,
    reg: PyRef<'_, PyReg>,
    epsilons: Vec<f64>,
    min_r_squared: f64,
) -> PyResult<BTreeMap<&'static str, f64>> {
    let p = reg.core();
    let s = py.detach(|| vacuum::scaling_sweep(&p, &epsilons, &QuadConfig::default(), min_r_squared)).map_err(err)?;
    Ok(BTreeMap::from([
        ("trace_slope", s.trace.slope),
        ("chain_slope", s.chain.slope),
        ("lagrangian_slope", s.lagrangian.slope),
    ]))
}

/// Shear or symmetric flow on a lattice background: area change against
/// matter flux. `family` is "commuting", "unitary" or "abelian"; the abelian
/// family uses a constant translation, the others a divergence-free shear.
#[pyfunction]
#[pyo3(signature = (family, axis, *, size = 4, f = 3, spin_dim = 1, seed = 5, amplitude = 0.3, kappa = 0.1, trace = 0.5))]
#[allow(clippy::too_many_arguments)]
fn jacobson(
    py: Python<'_>,
    family: &str,
    axis: usize,
    size: usize,
    f: usize,
    spin_dim: usize,
    seed: u64,
    amplitude: f64,
    kappa: f64,
    trace: f64,
) -> PyResult<BTreeMap<&'static str, f64>> {
    if axis > 3 {
        return Err(PyValueError::new_err(format!("axis {axis} is not in 0..4")));
    }
    let emb = match family {
        "commuting" => Embedding::random_commuting(f, spin_dim, seed, 0.3),
        "unitary" => Embedding::random_unitary_orbit(f, spin_dim, seed, 0.5),
        "abelian" => Embedding::random_abelian_orbit(f, spin_dim, seed, [0.3, 0.2, 0.4, 0.5]),
        other => return Err(PyValueError::new_err(format!("unknown family {other:?}"))),
    }
    .map_err(err)?;
    let v = if family == "abelian" {
        let mut e = [0.0; 4];
        e[axis] = amplitude;
        Field::Constant(e)
    } else {
        Field::ShearBump { axis, amplitude, lo: [0.0; 4], hi: [1.0; 4] }
    };
    let run = || {
        let bg = LatticeBackground::new(LatticeChart::unit_box(size)?, emb, Density::Constant(1.0))?;
        let mult = MultiplierSet::new(kappa, 0.0, trace)?;
        let cfg =
            SurfaceConfig::new(Region::below(&bg.chart, axis, 0.5), Region::below(&bg.chart, 2, 0.75), v.clone(), v);
        let tol = JacobsonTolerances { div_tol: 1e-10, killing_threshold: 1e-6, max_pairs: 20000 };
        jacobson_check(&cfg, &bg, &mult, &tol)
    };
    let j = py.detach(run).map_err(err)?;
    Ok(BTreeMap::from([
        ("area_change", j.da_dtau),
        ("flux", j.flux),
        ("defect", j.defect),
        ("scale", j.scale),
        ("killing_defect", j.killing.max_sym_defect),
        ("max_divergence", j.killing.max_div),
    ]))
}

fn relation(name: &str) -> PyResult<Relation> {
    Relation::ALL.into_iter().find(|r| r.name() == name).ok_or_else(|| {
        let names: Vec<&str> = Relation::ALL.iter().map(|r| r.name()).collect();
        PyValueError::new_err(format!("unknown relation {name:?}; expected one of {}", names.join(", ")))
    })
}

#[pyfunction]
fn relations() -> Vec<&'static str> {
    Relation::ALL.iter().map(|r| r.name()).collect()
}

/// Parametric closed form of a scaling relation, as text.
#[pyfunction]
fn closed_form(name: &str) -> PyResult<String> {
    Ok(scaling::closed_form(relation(name)?).to_string())
}

/// Derives a relation at concrete exponents in the standard regime; returns
/// the result and the derivation transcript.
#[pyfunction]
fn derive(name: &str, p: i64, q: i64, qhat: i64) -> PyResult<(String, String)> {
    let b = Bindings::full(p, q, qhat).map_err(err)?;
    let d = scaling::brute_force(relation(name)?, &b, &Regime::standard()).map_err(err)?;
    Ok((d.result.to_string(), d.transcript))
}

/// Whether matter is suppressed against the vacuum terms, as text.
#[pyfunction]
fn matter_vs_vacuum(p: i64, q: i64, qhat: i64) -> PyResult<BTreeMap<&'static str, String>> {
    let c = scaling::matter_vs_vacuum(p, q, qhat).map_err(err)?;
    let verdict = match &c.verdict {
        scaling::Verdict::Suppressed { factor, .. } => format!("suppressed by {factor}"),
        scaling::Verdict::Dominant => "dominant".into(),
        scaling::Verdict::Incomparable => "incomparable".into(),
    };
    Ok(BTreeMap::from([
        ("matter", c.matter.to_string()),
        ("vacuum", c.vacuum.to_string()),
        ("verdict", verdict),
        ("kappa_t_negligible", c.kappa_t_negligible.to_string()),
    ]))
}

/// True when every relation carries its expected length dimension.
#[pyfunction]
fn units_consistent() -> bool {
    scaling::unit_audit().consistent
}

#[pymodule]
fn cfslab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CfsError", m.py().get_type::<CfsError>())?;
    m.add("NonConvergence", m.py().get_type::<NonConvergence>())?;
    m.add_class::<PyOperator>()?;
    m.add_class::<PyMeasure>()?;
    m.add_class::<PyMultipliers>()?;
    m.add_class::<PyReg>()?;
    m.add_function(wrap_pyfunction!(lagrangian, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_weight, m)?)?;
    m.add_function(wrap_pyfunction!(product_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(minimize, m)?)?;
    m.add_function(wrap_pyfunction!(criticality, m)?)?;
    m.add_function(wrap_pyfunction!(scaling_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(jacobson, m)?)?;
    m.add_function(wrap_pyfunction!(relations, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(derive, m)?)?;
    m.add_function(wrap_pyfunction!(matter_vs_vacuum, m)?)?;
    m.add_function(wrap_pyfunction!(units_consistent, m)?)?;
    Ok(())
}
