//! Python bindings: images, automatic tau tuning, per-tau analyses with
//! their coverage and defect tables, and rendered maps.

use cldmap::optimize::{mean_length, support_fraction, DEFAULT_GRID};
use cldmap::pipeline::{ratio_to_percent, tau_from_percent, TauAnalysis};
use cldmap::render::{self, MapFormat};
use cldmap::{CldError, GrayImage, ImageStats, SyntheticSpec};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

create_exception!(cldmap, CldmapError, PyValueError);

fn err(e: CldError) -> PyErr {
    CldmapError::new_err(e.to_string())
}

fn format_of(name: &str) -> PyResult<MapFormat> {
    match name.to_ascii_lowercase().as_str() {
        "png" => Ok(MapFormat::Png),
        "bmp" => Ok(MapFormat::Bmp),
        other => Err(CldmapError::new_err(format!("unknown map format {other:?}"))),
    }
}

/// Grayscale image with 8-bit pixels in row-major order.
#[pyclass(name = "Image", module = "cldmap", frozen)]
struct PyImage {
    inner: GrayImage,
}

#[pymethods]
impl PyImage {
    #[new]
    fn new(width: usize, height: usize, pixels: &[u8]) -> PyResult<Self> {
        Ok(Self {
            inner: GrayImage::new(width, height, pixels.to_vec()).map_err(err)?,
        })
    }

    /// Decodes a BMP, JPEG or PNG file to luminance.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: cldmap::load_gray(path).map_err(err)?,
        })
    }

    /// Decodes an in-memory BMP, JPEG or PNG file.
    #[staticmethod]
    fn decode(data: &[u8]) -> PyResult<Self> {
        Ok(Self {
            inner: GrayImage::from_bytes(data).map_err(err)?,
        })
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn pixels<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.inner.pixels())
    }

    fn stats(&self) -> PyResult<Stats> {
        Ok(Stats {
            inner: cldmap::stats(&self.inner).map_err(err)?,
        })
    }

    fn to_png<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let bytes = render::encode(&self.inner.to_luma8(), MapFormat::Png).map_err(err)?;
        Ok(PyBytes::new(py, &bytes))
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{})", self.inner.width(), self.inner.height())
    }
}

/// Mean brightness and the largest meaningful saturation threshold.
#[pyclass(module = "cldmap", frozen)]
struct Stats {
    inner: ImageStats,
}

#[pymethods]
impl Stats {
    #[getter]
    fn mean_brightness(&self) -> f64 {
        self.inner.mean_brightness
    }

    #[getter]
    fn max_abs_deviation(&self) -> f64 {
        self.inner.max_abs_deviation
    }

    #[getter]
    fn tau_max(&self) -> f64 {
        self.inner.tau_max
    }

    fn __repr__(&self) -> String {
        format!(
            "Stats(mean_brightness={}, tau_max={})",
            self.inner.mean_brightness, self.inner.tau_max
        )
    }
}

/// Synthetic texture, e.g. `fixture("checkerboard", width=8, height=8,
/// cell=1)`.
#[pyfunction]
#[pyo3(signature = (kind, **params))]
fn fixture(kind: &str, params: Option<&Bound<'_, PyDict>>) -> PyResult<PyImage> {
    let mut spec = serde_json::Map::new();
    spec.insert("kind".into(), kind.replace('_', "-").into());
    if let Some(params) = params {
        for (k, v) in params.iter() {
            let key: String = k.extract()?;
            let value: u64 = v.extract()?;
            spec.insert(key, value.into());
        }
    }
    let spec: SyntheticSpec = serde_json::from_value(spec.into())
        .map_err(|e| CldmapError::new_err(format!("invalid fixture spec: {e}")))?;
    Ok(PyImage {
        inner: spec.generate().map_err(err)?,
    })
}

/// Result of automatic tau tuning.
#[pyclass(module = "cldmap", frozen)]
struct Optimization {
    #[pyo3(get)]
    tau0: f64,
    #[pyo3(get)]
    tau0_percent: f64,
    #[pyo3(get)]
    pi_at_tau0: f64,
    /// `(tau, omega, Omega, Pi)` per grid point.
    #[pyo3(get)]
    curve: Vec<(f64, f64, f64, f64)>,
}

#[pyfunction]
#[pyo3(signature = (image, grid = DEFAULT_GRID))]
fn optimize_tau(py: Python<'_>, image: &PyImage, grid: usize) -> PyResult<Optimization> {
    let img = image.inner.clone();
    let res = py
        .detach(move || {
            let s = cldmap::stats(&img)?;
            cldmap::optimize_tau(&img, &s, grid)
        })
        .map_err(err)?;
    Ok(Optimization {
        tau0: res.tau0,
        tau0_percent: ratio_to_percent(res.tau0),
        pi_at_tau0: res.pi_at_tau0,
        curve: res
            .curve
            .points
            .iter()
            .map(|p| (p.tau, p.omega, p.support, p.quality))
            .collect(),
    })
}

/// Coherence length diagrams and derived maps at one saturation threshold,
/// given in percent.
#[pyclass(module = "cldmap", frozen)]
struct Analysis {
    inner: TauAnalysis,
}

#[pymethods]
impl Analysis {
    #[new]
    fn new(py: Python<'_>, image: &PyImage, tau_percent: f64) -> PyResult<Self> {
        let img = image.inner.clone();
        let inner = py
            .detach(move || {
                let tau = tau_from_percent(tau_percent)?;
                let s = cldmap::stats(&img)?;
                TauAnalysis::compute(&img, &s, tau)
            })
            .map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau()
    }

    /// Mean length per direction; `None` where no pixel is supported.
    fn lengths(&self) -> Vec<Option<f64>> {
        self.inner.cld.overall.lengths.clone()
    }

    fn support_counts(&self) -> Vec<usize> {
        self.inner.cld.overall.support_counts.clone()
    }

    /// Per-pixel fraction of directions with a computable length.
    fn support_map(&self) -> Vec<f64> {
        self.inner.cld.support.values().collect()
    }

    fn mean_length(&self) -> PyResult<f64> {
        mean_length(&self.inner.cld.overall).map_err(err)
    }

    fn support_fraction(&self) -> f64 {
        support_fraction(&self.inner.cld.support)
    }

    /// Rows `(alpha, tau_prime, reachable)`; `tau_prime` is `None` on
    /// unreachable rows.
    #[pyo3(signature = (k = 10))]
    fn success_table(&self, k: usize) -> PyResult<Vec<(f64, Option<f64>, bool)>> {
        let t = self.inner.success_table(k).map_err(err)?;
        Ok(t.entries.iter().map(|e| (e.alpha, e.tau_prime, e.reachable)).collect())
    }

    /// Table parameters plus rows `(alpha, tau_doubleprime, reachable)`.
    #[pyo3(signature = (k = 10))]
    fn defect_table<'py>(&self, py: Python<'py>, k: usize) -> PyResult<Bound<'py, PyDict>> {
        let t = self.inner.defect_table(k).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("T_doubleprime", t.t_doubleprime)?;
        d.set_item("alpha_max", t.alpha_max)?;
        d.set_item("k", t.k)?;
        d.set_item("r", t.r)?;
        d.set_item("j_max", t.j_max)?;
        d.set_item("delta", t.delta)?;
        let rows: Vec<(f64, f64, bool)> = t.entries.iter().map(|e| (e.alpha, e.tau, e.reachable)).collect();
        d.set_item("entries", rows)?;
        Ok(d)
    }

    #[pyo3(signature = (coverage_percent, k = 10))]
    fn resolve_coverage(&self, coverage_percent: f64, k: usize) -> PyResult<f64> {
        self.inner
            .success_table(k)
            .and_then(|t| t.resolve_coverage(coverage_percent))
            .map_err(err)
    }

    #[pyo3(signature = (defect_pct, k = 10))]
    fn resolve_defect_pct(&self, defect_pct: f64, k: usize) -> PyResult<f64> {
        self.inner.tau_doubleprime_for_defect_pct(defect_pct, k).map_err(err)
    }

    fn successful_fraction(&self, tau_prime: f64) -> f64 {
        self.inner.defect_map(tau_prime).successful_fraction()
    }

    fn defect_fraction(&self, tau_doubleprime: f64) -> f64 {
        self.inner.ddmap.alpha_ratio(tau_doubleprime)
    }

    #[pyo3(signature = (format = "png"))]
    fn smap_image<'py>(&self, py: Python<'py>, format: &str) -> PyResult<Bound<'py, PyBytes>> {
        let img = render::render_smap(&self.inner.cld.support);
        let bytes = render::encode(&img, format_of(format)?).map_err(err)?;
        Ok(PyBytes::new(py, &bytes))
    }

    #[pyo3(signature = (tau_prime, format = "png"))]
    fn dmap_image<'py>(&self, py: Python<'py>, tau_prime: f64, format: &str) -> PyResult<Bound<'py, PyBytes>> {
        let img = render::render_dmap(&self.inner.defect_map(tau_prime));
        let bytes = render::encode(&img, format_of(format)?).map_err(err)?;
        Ok(PyBytes::new(py, &bytes))
    }

    #[pyo3(signature = (tau_doubleprime, format = "png"))]
    fn ddmap_image<'py>(&self, py: Python<'py>, tau_doubleprime: f64, format: &str) -> PyResult<Bound<'py, PyBytes>> {
        let img = render::render_ddmap(&self.inner.ddmap, tau_doubleprime);
        let bytes = render::encode(&img, format_of(format)?).map_err(err)?;
        Ok(PyBytes::new(py, &bytes))
    }
}

#[pymodule]
#[pyo3(name = "cldmap")]
fn cldmap_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CldmapError", m.py().get_type::<CldmapError>())?;
    m.add_class::<PyImage>()?;
    m.add_class::<Stats>()?;
    m.add_class::<Optimization>()?;
    m.add_class::<Analysis>()?;
    m.add_function(wrap_pyfunction!(fixture, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_tau, m)?)?;
    Ok(())
}
