//! Python bindings for the conditional independence test: the dataset
//! type, the test itself, the asymptotic null distribution, and the
//! simulation process, exposed as a small extension module.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use condindep::{
    ade, draw_sample, process, AdeSettings, CsvSchema, DgpConfig, Direction, RngStream,
};

fn to_py_err(e: condindep::Error) -> PyErr {
    match &e {
        condindep::Error::Io(_) | condindep::Error::Csv(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Observations (X in R^d, Y in {0,1}, Z in R), validated at construction.
#[pyclass(name = "Dataset")]
#[derive(Clone)]
struct PyDataset {
    inner: condindep::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Build from covariate rows, binary labels, and z values.
    #[new]
    fn new(xs: Vec<Vec<f64>>, ys: Vec<u8>, zs: Vec<f64>) -> PyResult<Self> {
        Ok(PyDataset {
            inner: condindep::Dataset::new(xs, ys, zs).map_err(to_py_err)?,
        })
    }

    /// Read a CSV with columns x1..xd, y, z (configurable names).
    #[staticmethod]
    #[pyo3(signature = (path, x_prefix="x", y_column="y", z_column="z"))]
    fn from_csv(path: &str, x_prefix: &str, y_column: &str, z_column: &str) -> PyResult<Self> {
        let schema = CsvSchema {
            x_prefix: x_prefix.into(),
            y_column: y_column.into(),
            z_column: z_column.into(),
        };
        Ok(PyDataset {
            inner: condindep::Dataset::from_csv_path(std::path::Path::new(path), &schema)
                .map_err(to_py_err)?,
        })
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        self.inner
            .write_csv_path(std::path::Path::new(path), &CsvSchema::default())
            .map_err(to_py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    fn class_counts(&self) -> (usize, usize) {
        self.inner.class_counts()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, d={})", self.inner.n(), self.inner.d())
    }
}

/// Result of one test run.
#[pyclass(name = "TestOutcome")]
struct PyTestOutcome {
    #[pyo3(get)]
    t_n: f64,
    #[pyo3(get)]
    ks_n: f64,
    #[pyo3(get)]
    p_value: f64,
    #[pyo3(get)]
    reject: bool,
    #[pyo3(get)]
    level: f64,
    #[pyo3(get)]
    m: usize,
    #[pyo3(get)]
    n0: usize,
    #[pyo3(get)]
    n1: usize,
    #[pyo3(get)]
    normalizer: f64,
    #[pyo3(get)]
    direction: Vec<f64>,
    #[pyo3(get)]
    mode: String,
    #[pyo3(get)]
    cell_counts: Vec<Vec<usize>>,
}

#[pymethods]
impl PyTestOutcome {
    fn __repr__(&self) -> String {
        format!(
            "TestOutcome(t_n={}, ks_n={}, p_value={}, m={})",
            self.t_n, self.ks_n, self.p_value, self.m
        )
    }
}

/// Run the test on a dataset.
///
/// `direction=None` estimates the index direction by the density-weighted
/// average derivative; otherwise pass an explicit vector (normalized
/// internally). `strict=True` refuses partitions where some class is
/// missing from some cell.
#[pyfunction]
#[pyo3(signature = (dataset, m, direction=None, level=0.05, bandwidth_scale=1.0, round_to_grid=true, strict=false))]
#[allow(clippy::too_many_arguments)]
fn run_test(
    dataset: &PyDataset,
    m: usize,
    direction: Option<Vec<f64>>,
    level: f64,
    bandwidth_scale: f64,
    round_to_grid: bool,
    strict: bool,
) -> PyResult<PyTestOutcome> {
    if !(level > 0.0 && level < 1.0) {
        return Err(PyValueError::new_err(format!(
            "level must be in (0,1), got {level}"
        )));
    }
    let mode = match direction {
        Some(v) => process::TestMode::Oracle(Direction::from_unnormalized(&v).map_err(to_py_err)?),
        None => process::TestMode::Estimate(AdeSettings {
            bandwidth_scale,
            round_to_grid,
        }),
    };
    let res = if strict {
        process::run_test_strict(&dataset.inner, m, &mode)
    } else {
        process::run_test(&dataset.inner, m, &mode)
    }
    .map_err(to_py_err)?;
    Ok(PyTestOutcome {
        t_n: res.t_n,
        ks_n: res.ks_n,
        p_value: res.p_value_cvm,
        reject: res.p_value_cvm < level,
        level,
        m: res.m,
        n0: res.cell_counts.n0(),
        n1: res.cell_counts.n1(),
        normalizer: res.normalizer,
        direction: res.direction,
        mode: res.mode.to_string(),
        cell_counts: vec![
            res.cell_counts.row(0).to_vec(),
            res.cell_counts.row(1).to_vec(),
        ],
    })
}

/// Estimate the index direction by the density-weighted average derivative.
#[pyfunction]
#[pyo3(signature = (dataset, bandwidth_scale=1.0, round_to_grid=true))]
fn estimate_direction(
    dataset: &PyDataset,
    bandwidth_scale: f64,
    round_to_grid: bool,
) -> PyResult<Vec<f64>> {
    let cfg = ade::AdeConfig::from_dataset(
        &dataset.inner,
        &AdeSettings {
            bandwidth_scale,
            round_to_grid,
        },
    )
    .map_err(to_py_err)?;
    Ok(ade::estimate_direction(&dataset.inner, &cfg)
        .map_err(to_py_err)?
        .as_slice()
        .to_vec())
}

/// CDF of the asymptotic null law of the statistic.
#[pyfunction]
fn cvm_limit_cdf(x: f64) -> f64 {
    condindep::cvm_limit_cdf(x)
}

/// Quantile of the asymptotic null law.
#[pyfunction]
fn cvm_limit_quantile(p: f64) -> PyResult<f64> {
    condindep::cvm_limit_quantile(p).map_err(to_py_err)
}

/// Asymptotic p-value of an observed statistic.
#[pyfunction]
fn p_value(t: f64) -> PyResult<f64> {
    condindep::p_value(t).map_err(to_py_err)
}

/// One sample from the built-in simulation process (uniform covariates,
/// single-index outcome and z equations), reproducible from the seed.
#[pyfunction]
#[pyo3(signature = (d, sigma, theta, n, seed))]
fn draw_simulated_sample(
    d: usize,
    sigma: f64,
    theta: f64,
    n: usize,
    seed: u64,
) -> PyResult<PyDataset> {
    let cfg = DgpConfig::new(d, sigma, theta, n).map_err(to_py_err)?;
    let mut rng = RngStream::new(seed);
    Ok(PyDataset {
        inner: draw_sample(&cfg, &mut rng),
    })
}

#[pymodule]
fn condindep_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyTestOutcome>()?;
    m.add_function(wrap_pyfunction!(run_test, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_direction, m)?)?;
    m.add_function(wrap_pyfunction!(cvm_limit_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(cvm_limit_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(p_value, m)?)?;
    m.add_function(wrap_pyfunction!(draw_simulated_sample, m)?)?;
    Ok(())
}
