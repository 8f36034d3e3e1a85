//! Python bindings. Structured reports cross the boundary as JSON strings;
//! `json.loads` turns them into dictionaries.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use nls::flow::{FlowConfig, Picture};
use nls::gibbs::{GibbsConfig, Observable};
use nls::rro::AnsatzConfig;

fn err(e: nls::Error) -> PyErr {
    match e {
        nls::Error::Io(_) | nls::Error::Cache(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

fn picture(name: &str) -> PyResult<Picture> {
    match name {
        "physical" => Ok(Picture::Physical),
        "interaction" => Ok(Picture::Interaction),
        _ => Err(PyValueError::new_err(format!("unknown picture {name:?}"))),
    }
}

/// Radial Dirichlet eigenbasis of the unit disc with its quadrature rule.
#[pyclass(name = "SpectralBasis", module = "disc_nls", frozen)]
struct PyBasis {
    inner: nls::SpectralBasis,
}

#[pymethods]
impl PyBasis {
    #[new]
    #[pyo3(signature = (modes, product_order = 4))]
    fn new(modes: usize, product_order: usize) -> PyResult<Self> {
        Ok(Self {
            inner: nls::SpectralBasis::build(modes, product_order).map_err(err)?,
        })
    }

    #[getter]
    fn mode_count(&self) -> usize {
        self.inner.mode_count()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    fn lambdas(&self) -> Vec<f64> {
        self.inner.lambdas()
    }

    /// `e_n(r)`.
    fn eval(&self, n: usize, r: f64) -> PyResult<f64> {
        Ok(self.inner.mode(n).map_err(err)?.eval(r))
    }

    fn orthonormality_defect(&self) -> f64 {
        self.inner.orthonormality_defect()
    }

    /// `||e_n||_{L^p}`; pass `float("inf")` for the sup norm.
    fn lp_norm(&self, n: usize, p: f64) -> PyResult<f64> {
        self.inner.lp_norm(n, p).map_err(err)
    }

    /// `int_D prod_j e_{n_j}`.
    fn correlate(&self, indices: Vec<usize>) -> PyResult<f64> {
        nls::correlate(&self.inner, &indices).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "SpectralBasis(modes={}, product_order={}, nodes={})",
            self.inner.mode_count(),
            self.inner.product_order,
            self.inner.node_count()
        )
    }
}

/// Complex coefficients over the eigenbasis (index 0 is mode 1).
#[pyclass(name = "SpectralField", module = "disc_nls", skip_from_py_object)]
#[derive(Clone)]
struct PyField {
    inner: nls::SpectralField,
}

#[pymethods]
impl PyField {
    #[new]
    fn new(coeffs: Vec<Complex64>, support_bound: f64) -> Self {
        Self {
            inner: nls::SpectralField::new(coeffs, support_bound),
        }
    }

    #[getter]
    fn coeffs(&self) -> Vec<Complex64> {
        self.inner.coeffs.clone()
    }

    #[getter]
    fn support_bound(&self) -> f64 {
        self.inner.support_bound
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn l2_norm(&self) -> f64 {
        self.inner.l2_norm()
    }

    fn hs_norm(&self, basis: &PyBasis, s: f64) -> f64 {
        self.inner.hs_norm(&basis.inner.lambdas(), s)
    }

    /// `||sum lambda^s c_n e_n||_{L^p}`.
    fn sobolev_norm(&self, basis: &PyBasis, s: f64, p: f64) -> PyResult<f64> {
        nls::norms::sobolev_norm(&basis.inner, &self.inner, s, p).map_err(err)
    }

    /// Apply the linear propagator `S(t)`.
    fn propagate(&self, basis: &PyBasis, t: f64) -> Self {
        Self {
            inner: self.inner.propagate(&basis.inner.lambdas(), t),
        }
    }

    /// Values on the quadrature nodes.
    fn synthesize(&self, basis: &PyBasis) -> PyResult<Vec<Complex64>> {
        basis.inner.synthesize(&self.inner).map_err(err)
    }
}

/// Sampled solution of the truncated flow.
#[pyclass(name = "Trajectory", module = "disc_nls", frozen)]
struct PyTrajectory {
    inner: nls::flow::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn mass(&self) -> Vec<f64> {
        self.inner.mass.clone()
    }

    #[getter]
    fn hamiltonian(&self) -> Vec<f64> {
        self.inner.hamiltonian.clone()
    }

    fn state(&self, i: usize) -> PyResult<PyField> {
        self.inner
            .states
            .get(i)
            .map(|s| PyField { inner: s.clone() })
            .ok_or_else(|| PyValueError::new_err(format!("no sample {i}")))
    }

    /// Largest relative mass and Hamiltonian drift.
    fn max_drift(&self) -> (f64, f64) {
        self.inner.max_drift()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }
}

/// Gaussian free field draw truncated to `lambda_n <= cutoff`.
#[pyfunction]
fn gff(basis: &PyBasis, cutoff: f64, seed: u64) -> PyResult<PyField> {
    let draw = nls::gibbs::sample_gff(&basis.inner, cutoff, seed).map_err(err)?;
    Ok(PyField { inner: draw.field })
}

fn flow_config(k: usize, cutoff: f64, dt: Option<f64>, samples: usize, pic: &str, nonlinear: bool) -> PyResult<FlowConfig> {
    let mut cfg = FlowConfig::new(k, cutoff).with_samples(samples).with_picture(picture(pic)?);
    if let Some(dt) = dt {
        cfg = cfg.with_dt(dt);
    }
    cfg.nonlinear = nonlinear;
    Ok(cfg)
}

/// Integrate the truncated flow from `u0` to time `t`.
#[pyfunction]
#[pyo3(signature = (basis, u0, t, k = 1, cutoff = None, dt = None, samples = 10, picture = "physical", nonlinear = true))]
#[allow(clippy::too_many_arguments)]
fn evolve(
    py: Python<'_>,
    basis: &PyBasis,
    u0: &PyField,
    t: f64,
    k: usize,
    cutoff: Option<f64>,
    dt: Option<f64>,
    samples: usize,
    picture: &str,
    nonlinear: bool,
) -> PyResult<PyTrajectory> {
    let cutoff = cutoff.unwrap_or(u0.inner.support_bound);
    let cfg = flow_config(k, cutoff, dt, samples, picture, nonlinear)?;
    let inner = py
        .detach(|| nls::flow::evolve(&basis.inner, &u0.inner, t, &cfg))
        .map_err(err)?;
    Ok(PyTrajectory { inner })
}

/// `||Phi_s Phi_t u0 - Phi_{s+t} u0||`.
#[pyfunction]
#[pyo3(signature = (basis, u0, s, t, k = 1, dt = None))]
fn flow_property(py: Python<'_>, basis: &PyBasis, u0: &PyField, s: f64, t: f64, k: usize, dt: Option<f64>) -> PyResult<f64> {
    let cfg = flow_config(k, u0.inner.support_bound, dt, 1, "interaction", true)?;
    py.detach(|| nls::flow::flow_property_check(&basis.inner, &u0.inner, s, t, &cfg))
        .map_err(err)
}

/// Gibbs invariance z-scores as a JSON report.
#[pyfunction]
#[pyo3(signature = (basis, cutoff, t, samples, seed, k = 1, observables = None, potential_scale = 1.0))]
#[allow(clippy::too_many_arguments)]
fn invariance_test(
    py: Python<'_>,
    basis: &PyBasis,
    cutoff: f64,
    t: f64,
    samples: usize,
    seed: u64,
    k: usize,
    observables: Option<Vec<String>>,
    potential_scale: f64,
) -> PyResult<String> {
    let obs = match observables {
        Some(list) => list
            .iter()
            .map(|s| s.parse::<Observable>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?,
        None => nls::gibbs::default_observables(),
    };
    let cfg = GibbsConfig::new(k, cutoff).with_potential_scale(potential_scale);
    let report = py
        .detach(|| nls::gibbs::invariance_test(&basis.inner, &cfg, &FlowConfig::new(k, cutoff), t, samples, &obs, seed))
        .map_err(err)?;
    to_json(&report)
}

/// Per-time norms of `y_N`, `psi_N`, `z_N` for one seed, as JSON.
#[pyfunction]
#[pyo3(signature = (basis, seed, cutoff, k = 2, t = 0.3, kappa = 0.1))]
fn decompose(py: Python<'_>, basis: &PyBasis, seed: u64, cutoff: f64, k: usize, t: f64, kappa: f64) -> PyResult<String> {
    let mut cfg = AnsatzConfig::new(k, t, cutoff);
    cfg.kappa = kappa;
    let d = py
        .detach(|| nls::rro::decompose(&basis.inner, seed, cutoff, &cfg))
        .map_err(err)?;
    #[derive(serde::Serialize)]
    struct Out<'a> {
        cutoff: f64,
        level: f64,
        modes: &'a [usize],
        rows: Vec<nls::rro::NormRow>,
        identity_defect: f64,
    }
    to_json(&Out {
        cutoff: d.cutoff,
        level: d.level,
        modes: &d.phases.modes,
        rows: d.norm_rows(&basis.inner.lambdas()),
        identity_defect: d.identity_defect(),
    })
}

/// `(l4, h_eps, ratio)` of the windowed linear flow.
#[pyfunction]
fn strichartz_ratio(py: Python<'_>, basis: &PyBasis, f: &PyField, eps: f64) -> PyResult<(f64, f64, f64)> {
    let v = py
        .detach(|| nls::norms::strichartz_ratio(&basis.inner, &f.inner, eps))
        .map_err(err)?;
    Ok((v.l4, v.h_eps, v.ratio))
}

/// Resonance phase of `(n, n_1, ..., n_{2k+1})`.
#[pyfunction]
fn phase(basis: &PyBasis, indices: Vec<usize>) -> PyResult<f64> {
    let lambdas = basis.inner.lambdas();
    if indices.len() < 4 || indices.len() % 2 == 1 {
        return Err(PyValueError::new_err("expected an index tuple of length 2k+2"));
    }
    if indices.iter().any(|&n| n == 0 || n > lambdas.len()) {
        return Err(PyValueError::new_err("index outside the basis"));
    }
    Ok(nls::counting::phase(&lambdas, &indices))
}

/// Worst-case `(m, count)` of difference pairs in the box of radius `r`.
#[pyfunction]
#[pyo3(signature = (r, exclude_diagonal = true))]
fn worst_case_diff_pairs(r: usize, exclude_diagonal: bool) -> PyResult<(i64, u64)> {
    let sq = nls::counting::eigenvalue_squares(r);
    let w = nls::counting::worst_case_diff_pairs(&sq, r, exclude_diagonal).map_err(err)?;
    Ok((w.m, w.count))
}

/// Scaling regularities for degree `k` as JSON.
#[pyfunction]
fn scaling_report(k: usize, n_bound: f64) -> PyResult<String> {
    to_json(&nls::counting::scaling_report(None, k, n_bound).map_err(err)?)
}

#[pymodule]
fn disc_nls(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBasis>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(gff, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(flow_property, m)?)?;
    m.add_function(wrap_pyfunction!(invariance_test, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(strichartz_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(phase, m)?)?;
    m.add_function(wrap_pyfunction!(worst_case_diff_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(scaling_report, m)?)?;
    Ok(())
}
