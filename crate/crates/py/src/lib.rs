//! Python bindings. Vectors and matrices cross the boundary as lists; reports
//! come back as plain dicts.

use ndarray::{Array1, Array2};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use spls::datagen;
use spls::diffusion;
use spls::experiment::{self, ExperimentConfig};
use spls::landscape;
use spls::msg;
use spls::oracle;
use spls::pls_core::{self, TwoViewSample};
use spls::Error;

fn err(e: Error) -> PyErr {
    match e {
        Error::Config { .. }
        | Error::InvalidArgument(_)
        | Error::DimensionMismatch { .. }
        | Error::Parse { .. }
        | Error::RowCountMismatch { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let n = rows.len();
    let w = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != w) {
        return Err(PyValueError::new_err("rows have unequal lengths"));
    }
    Ok(Array2::from_shape_fn((n, w), |(i, j)| rows[i][j]))
}

fn from_matrix(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

fn to_py_json<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A (u, v) iterate of the Hebbian update.
#[pyclass(name = "PlsIterate", module = "spls_py", skip_from_py_object)]
struct PyPlsIterate {
    inner: pls_core::PlsIterate,
}

#[pymethods]
impl PyPlsIterate {
    /// Normalizes `u` and `v` to unit length.
    #[new]
    fn new(u: Vec<f64>, v: Vec<f64>) -> PyResult<Self> {
        let inner = pls_core::PlsIterate::normalized(Array1::from(u), Array1::from(v)).map_err(err)?;
        Ok(PyPlsIterate { inner })
    }

    #[getter]
    fn u(&self) -> Vec<f64> {
        self.inner.u.to_vec()
    }

    #[getter]
    fn v(&self) -> Vec<f64> {
        self.inner.v.to_vec()
    }

    #[getter]
    fn step_count(&self) -> u64 {
        self.inner.step_count
    }

    fn objective(&self, sigma_xy: Vec<Vec<f64>>) -> PyResult<f64> {
        pls_core::objective(&self.inner, &to_matrix(sigma_xy)?).map_err(err)
    }

    fn alignment_error(&self, u_hat: Vec<f64>, v_hat: Vec<f64>) -> PyResult<f64> {
        pls_core::alignment_error(&self.inner, &Array1::from(u_hat), &Array1::from(v_hat)).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "PlsIterate(u={:?}, v={:?}, step_count={})",
            self.inner.u.to_vec(),
            self.inner.v.to_vec(),
            self.inner.step_count
        )
    }
}

/// One Hebbian step on the sample `(x, y)`.
#[pyfunction]
fn gha_step(it: PyRef<'_, PyPlsIterate>, x: Vec<f64>, y: Vec<f64>, eta: f64) -> PyResult<PyPlsIterate> {
    let s = TwoViewSample::new(Array1::from(x), Array1::from(y)).map_err(err)?;
    let inner = pls_core::gha_step(&it.inner, &s, eta).map_err(err)?;
    Ok(PyPlsIterate { inner })
}

/// Gaussian two-view model with random orthogonal mixing.
#[pyclass(name = "CovarianceModel", module = "spls_py")]
struct PyCovarianceModel {
    inner: datagen::CovarianceModel,
}

#[pymethods]
impl PyCovarianceModel {
    #[new]
    #[pyo3(signature = (sigma_xx, sigma_xy, sigma_yy, m, d, seed=0))]
    fn new(
        sigma_xx: Vec<Vec<f64>>,
        sigma_xy: Vec<Vec<f64>>,
        sigma_yy: Vec<Vec<f64>>,
        m: usize,
        d: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let inner = datagen::build_model(
            &to_matrix(sigma_xx)?,
            &to_matrix(sigma_xy)?,
            &to_matrix(sigma_yy)?,
            m,
            d,
            seed,
        )
        .map_err(err)?;
        Ok(PyCovarianceModel { inner })
    }

    /// The three-factor benchmark model.
    #[staticmethod]
    #[pyo3(signature = (seed=0))]
    fn benchmark(seed: u64) -> PyResult<Self> {
        let (xx, xy, yy) = datagen::benchmark_latents();
        let inner = datagen::build_model(&xx, &xy, &yy, 3, 3, seed).map_err(err)?;
        Ok(PyCovarianceModel { inner })
    }

    #[getter]
    fn sigma_xy(&self) -> Vec<Vec<f64>> {
        from_matrix(&self.inner.sigma_xy)
    }

    #[getter]
    fn singular_values(&self) -> Vec<f64> {
        self.inner.latent_singular_values().to_vec()
    }

    /// `n` draws as a pair of lists `(xs, ys)`.
    #[pyo3(signature = (n, seed=0))]
    fn sample(&self, n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        use pls_core::SampleSource;
        let mut src = datagen::GaussianSource::new(&self.inner, seed);
        (0..n)
            .map(|_| {
                let s = src.next_sample().expect("gaussian stream is infinite");
                (s.x.to_vec(), s.y.to_vec())
            })
            .unzip()
    }
}

/// h-coordinates of `(u, v)` in the spectral basis of `sigma_xy`.
#[pyfunction]
fn h_coordinates(it: PyRef<'_, PyPlsIterate>, sigma_xy: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let basis = diffusion::build_basis(&to_matrix(sigma_xy)?).map_err(err)?;
    Ok(diffusion::to_h(&it.inner, &basis).map_err(err)?.to_vec())
}

#[pyfunction]
fn ode_solution(h0: Vec<f64>, lambda: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
    if h0.len() != lambda.len() {
        return Err(PyValueError::new_err("h0 and lambda must have equal length"));
    }
    Ok(diffusion::ode_solution(&Array1::from(h0), &Array1::from(lambda), t).to_vec())
}

/// Singular values and vectors as `(U, s, V)`.
#[pyfunction]
fn svd(a: Vec<Vec<f64>>) -> PyResult<(Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>)> {
    let s = oracle::svd(to_matrix(a)?.view()).map_err(err)?;
    Ok((from_matrix(&s.o_x), s.singular.to_vec(), from_matrix(&s.o_y)))
}

#[pyfunction]
fn stationary_points<'py>(py: Python<'py>, sigma_xy: Vec<Vec<f64>>) -> PyResult<Vec<Bound<'py, PyAny>>> {
    let pts = landscape::enumerate_stationary_points(&to_matrix(sigma_xy)?).map_err(err)?;
    pts.iter()
        .map(|p| {
            let d = pyo3::types::PyDict::new(py);
            d.set_item("kind", to_py_json(py, &p.kind)?)?;
            d.set_item("singular_value", p.singular_value)?;
            d.set_item("multiplier", p.multiplier)?;
            d.set_item("max_hessian_eig", p.max_hessian_eig)?;
            d.set_item("reduced_max_eig", p.reduced_max_eig)?;
            d.set_item("u", p.u.to_vec())?;
            d.set_item("v", p.v.to_vec())?;
            Ok(d.into_any())
        })
        .collect()
}

/// Predicted phase durations for the benchmark-style model `model`.
#[pyfunction]
#[pyo3(signature = (model, eta, nu=0.1, epsilon=0.05, mu=0.75))]
fn phase_times<'py>(
    py: Python<'py>,
    model: PyRef<'_, PyCovarianceModel>,
    eta: f64,
    nu: f64,
    epsilon: f64,
    mu: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let basis = diffusion::build_basis(&model.inner.sigma_xy).map_err(err)?;
    let p = diffusion::phase_times(&basis.lambda, &model.inner.moments, eta, nu, epsilon, mu).map_err(err)?;
    to_py_json(py, &p)
}

#[pyfunction]
fn capped_simplex_project(sigma: Vec<f64>, cap: f64, budget: f64) -> Vec<f64> {
    msg::capped_simplex_project(&sigma, cap, budget)
}

#[pyfunction]
fn fantope_project(m: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(from_matrix(&msg::fantope_project(&to_matrix(m)?).map_err(err)?))
}

/// One projected step of the convex baseline.
#[pyfunction]
fn msg_step(m: Vec<Vec<f64>>, x: Vec<f64>, y: Vec<f64>, eta: f64) -> PyResult<Vec<Vec<f64>>> {
    let it = msg::MsgIterate {
        m: to_matrix(m)?,
        step_count: 0,
    };
    let s = TwoViewSample::new(Array1::from(x), Array1::from(y)).map_err(err)?;
    Ok(from_matrix(&msg::msg_step(&it, &s, eta).map_err(err)?.m))
}

fn parse_config(toml: Option<&str>) -> PyResult<ExperimentConfig> {
    match toml {
        Some(t) => ExperimentConfig::from_toml_str(t).map_err(err),
        None => Ok(ExperimentConfig::default()),
    }
}

/// Runs an experiment from a TOML config string and returns
/// `{"summary": ..., "phase_report": ...}`. Artifacts are also written when
/// the config sets `output_dir`.
#[pyfunction]
#[pyo3(signature = (config=None))]
fn run_experiment<'py>(py: Python<'py>, config: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = parse_config(config)?;
    let b = py.detach(|| experiment::run_experiment(&cfg)).map_err(err)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("summary", to_py_json(py, &b.summary)?)?;
    d.set_item("phase_report", to_py_json(py, &b.phase_report)?)?;
    d.set_item("ou_report", to_py_json(py, &b.ou_report)?)?;
    Ok(d.into_any())
}

/// Per-seed comparison of the Hebbian update and the convex baseline.
#[pyfunction]
#[pyo3(signature = (config=None))]
fn compare_algorithms<'py>(py: Python<'py>, config: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = parse_config(config)?;
    cfg.algorithm = experiment::Algorithm::Both;
    let c = py.detach(|| experiment::compare_algorithms(&cfg)).map_err(err)?;
    let (g, m) = c.median_ms_per_1k();
    let d = pyo3::types::PyDict::new(py);
    d.set_item("target_gap", c.target_gap)?;
    d.set_item("gha_faster", c.gha_faster_count())?;
    d.set_item("seeds", to_py_json(py, &c.seeds)?)?;
    d.set_item("median_gha_ms_per_1k", g)?;
    d.set_item("median_msg_ms_per_1k", m)?;
    Ok(d.into_any())
}

/// The default experiment configuration as TOML.
#[pyfunction]
fn default_config() -> String {
    ExperimentConfig::default().to_toml_string()
}

#[pymodule]
fn spls_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPlsIterate>()?;
    m.add_class::<PyCovarianceModel>()?;
    m.add_function(wrap_pyfunction!(gha_step, m)?)?;
    m.add_function(wrap_pyfunction!(h_coordinates, m)?)?;
    m.add_function(wrap_pyfunction!(ode_solution, m)?)?;
    m.add_function(wrap_pyfunction!(svd, m)?)?;
    m.add_function(wrap_pyfunction!(stationary_points, m)?)?;
    m.add_function(wrap_pyfunction!(phase_times, m)?)?;
    m.add_function(wrap_pyfunction!(capped_simplex_project, m)?)?;
    m.add_function(wrap_pyfunction!(fantope_project, m)?)?;
    m.add_function(wrap_pyfunction!(msg_step, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(compare_algorithms, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    Ok(())
}
