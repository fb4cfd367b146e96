//! Python bindings: process simulation, the kernel specification test,
//! the U-statistic test and Monte Carlo size tables.

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

use wnp_core::kernelfn::{Kernel, KernelSpec};
use wnp_core::limitlab::oracle_suite;
use wnp_core::mc::{run_size, table_to_csv, with_threads, McDesign};
use wnp_core::procgen::{self, draw_path, InnovationSpec, PresampleMode};
use wnp_core::regress::{GFunction, PredictiveSample};
use wnp_core::rng::StreamSeed;
use wnp_core::spectest::{self, f_tilde_sample, FTildeConfig};

fn to_py(e: wnp_core::Error) -> PyErr {
    if e.is_numerical() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

/// Regressor process specification.
#[pyclass(name = "ProcessSpec", module = "wnp", from_py_object)]
#[derive(Clone)]
struct PyProcessSpec {
    inner: procgen::ProcessSpec,
}

#[pymethods]
impl PyProcessSpec {
    #[staticmethod]
    #[pyo3(signature = (d, ma=vec![1.0]))]
    fn fr2(d: f64, ma: Vec<f64>) -> PyResult<Self> {
        procgen::ProcessSpec::fractional_type2(d, ma)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (trunc=None))]
    fn fr1(trunc: Option<usize>) -> PyResult<Self> {
        procgen::ProcessSpec::fractional_type1(trunc)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (alpha_kappa, ma=vec![1.0]))]
    fn mi(alpha_kappa: f64, ma: Vec<f64>) -> PyResult<Self> {
        procgen::ProcessSpec::mildly_integrated(alpha_kappa, ma)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (ma=vec![1.0]))]
    fn ni(ma: Vec<f64>) -> PyResult<Self> {
        procgen::ProcessSpec::nearly_integrated(ma)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: procgen::ProcessSpec =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Simulates `(x, u)` of length `n`.
    #[pyo3(signature = (n, rho=0.0, seed=0, zero_presample=false))]
    fn simulate(
        &self,
        n: usize,
        rho: f64,
        seed: u64,
        zero_presample: bool,
    ) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let innov = InnovationSpec::new(rho).map_err(to_py)?;
        let mode = if zero_presample {
            PresampleMode::Zero
        } else {
            PresampleMode::Random
        };
        let (path, u) =
            draw_path(&self.inner, &innov, n, mode, StreamSeed::new(seed, 0)).map_err(to_py)?;
        Ok((path.values, u))
    }

    fn exact_sd(&self, n: usize) -> PyResult<f64> {
        procgen::exact_sd(&self.inner, n).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("ProcessSpec({})", self.inner.label())
    }
}

/// Outcome of the kernel specification test.
#[pyclass(name = "SpecTestResult", module = "wnp", get_all)]
struct PySpecTestResult {
    f_tilde: f64,
    t: Vec<f64>,
    p: usize,
    crit: f64,
    pvalue: f64,
    reject: bool,
    points: Vec<f64>,
}

#[pymethods]
impl PySpecTestResult {
    fn __repr__(&self) -> String {
        format!(
            "SpecTestResult(f_tilde={:.4}, p={}, crit={:.4}, pvalue={:.4}, reject={})",
            self.f_tilde, self.p, self.crit, self.pvalue, self.reject
        )
    }
}

fn sample(x: Vec<f64>, y: Vec<f64>) -> PyResult<PredictiveSample> {
    PredictiveSample::new(x, y).map_err(to_py)
}

/// Kernel specification test of a linear predictive regression;
/// `y[t]` is regressed on `x[t-1]`.
#[pyfunction]
#[pyo3(signature = (x, y, h, p=17, alpha=0.1, kernel="gaussian"))]
fn f_tilde_test(
    x: Vec<f64>,
    y: Vec<f64>,
    h: f64,
    p: usize,
    alpha: f64,
    kernel: &str,
) -> PyResult<PySpecTestResult> {
    let kind: Kernel = kernel.parse().map_err(to_py)?;
    let cfg = FTildeConfig {
        kernel: KernelSpec::new(kind).map_err(to_py)?,
        h,
        p,
        alpha,
    };
    let s = sample(x, y)?;
    let (r, points) = f_tilde_sample(&s, &GFunction::Identity, &cfg).map_err(to_py)?;
    Ok(PySpecTestResult {
        f_tilde: r.f_tilde,
        t: r.per_point_t,
        p: r.p,
        crit: r.critical_value,
        pvalue: r.p_value,
        reject: r.reject,
        points: points.points,
    })
}

/// Self-normalized U-statistic of OLS residuals.
#[pyfunction]
fn wp_statistic(x: Vec<f64>, y: Vec<f64>, h: f64) -> PyResult<f64> {
    let s = sample(x, y)?;
    spectest::wp_statistic(s.response(), s.lagged(), h, &KernelSpec::gaussian()).map_err(to_py)
}

#[pyfunction]
fn chi2_quantile(df: usize, prob: f64) -> PyResult<f64> {
    spectest::chi2_quantile(df, prob).map_err(to_py)
}

/// Runs a size design given as JSON and returns the full-precision CSV table.
#[pyfunction]
#[pyo3(signature = (config, seed=None, threads=None))]
fn mc_size(config: &str, seed: Option<u64>, threads: Option<usize>) -> PyResult<String> {
    let design: McDesign =
        serde_json::from_str(config).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let table = with_threads(threads, || run_size(&design, seed))
        .and_then(|r| r)
        .map_err(to_py)?;
    table_to_csv(&table, true).map_err(to_py)
}

/// `(name, computed, expected, passed)` for each analytic check.
#[pyfunction]
fn oracle() -> PyResult<Vec<(String, f64, f64, bool)>> {
    Ok(oracle_suite()
        .map_err(to_py)?
        .into_iter()
        .map(|c| {
            let ok = c.passed();
            (c.name, c.computed, c.expected, ok)
        })
        .collect())
}

#[pymodule]
fn wnp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProcessSpec>()?;
    m.add_class::<PySpecTestResult>()?;
    m.add_function(wrap_pyfunction!(f_tilde_test, m)?)?;
    m.add_function(wrap_pyfunction!(wp_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(chi2_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(mc_size, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    Ok(())
}
