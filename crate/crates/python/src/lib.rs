//! Python bindings for the filter selection library.

use std::fs::File;

use filtersel::selection::{full_search_with, FullSearchOptions};
use filtersel::synth::{spectral_benchmark, BenchmarkConfig, SpectrumFamily};
use filtersel::table::Delimiter;
use filtersel::{
    build_adjacency, fbs_select, integrate_responses, load_spectra, make_sweep_bank,
    make_uniform_bank, max_independent_set, AdjacencyMatrix, ConflictGraph, FbsConfig,
    FeasibilityMode, FilterBank, FilterMatrix, LoadOptions, MetricId, SelectionError,
    SelectionResult, Shape, SpectrumSet, TrainedModel, WavelengthGrid,
};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIOError, PyValueError};
use pyo3::prelude::*;

create_exception!(filtersel, GuardExceeded, PyException);

fn value_error(err: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(err.to_string())
}

fn selection_error(err: SelectionError) -> PyErr {
    match err {
        SelectionError::GuardExceeded { .. } => GuardExceeded::new_err(err.to_string()),
        other => value_error(other),
    }
}

fn parse_metric(name: &str) -> PyResult<MetricId> {
    name.parse().map_err(value_error)
}

fn parse_shape(name: &str) -> PyResult<Shape> {
    name.parse().map_err(value_error)
}

#[pyfunction]
fn spectral_angle(u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
    filtersel::metrics::spectral_angle(&u, &v).map_err(value_error)
}

#[pyfunction]
fn spectral_information_divergence(u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
    filtersel::metrics::spectral_information_divergence(&u, &v).map_err(value_error)
}

#[pyfunction]
fn spectral_correlation_angle(u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
    filtersel::metrics::spectral_correlation_angle(&u, &v).map_err(value_error)
}

/// Symmetric matrix of pairwise distances between filter response rows.
#[pyclass(name = "Adjacency", module = "filtersel", frozen)]
struct PyAdjacency {
    inner: AdjacencyMatrix,
}

#[pymethods]
impl PyAdjacency {
    /// Builds the matrix from a response table with one row per filter.
    #[staticmethod]
    #[pyo3(signature = (responses, metric = "angle", ids = None))]
    fn from_responses(
        responses: Vec<Vec<f64>>,
        metric: &str,
        ids: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let metric = parse_metric(metric)?;
        let matrix = match ids {
            Some(ids) => {
                let cols = responses.first().map_or(0, Vec::len);
                let labels = (1..=cols).map(|j| format!("o{j}")).collect();
                FilterMatrix::from_rows(responses, ids, labels)
            }
            None => FilterMatrix::from_rows_unlabeled(responses),
        }
        .map_err(value_error)?;
        let inner = build_adjacency(&matrix, metric).map_err(value_error)?;
        Ok(PyAdjacency { inner })
    }

    /// Wraps a precomputed square distance matrix.
    #[staticmethod]
    #[pyo3(signature = (rows, ids = None, metric = "angle"))]
    fn from_matrix(rows: Vec<Vec<f64>>, ids: Option<Vec<String>>, metric: &str) -> PyResult<Self> {
        let metric = parse_metric(metric)?;
        let ids = ids.unwrap_or_else(|| (0..rows.len()).map(|i| i.to_string()).collect());
        let inner = AdjacencyMatrix::from_rows(rows, ids, metric).map_err(value_error)?;
        Ok(PyAdjacency { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn ids(&self) -> Vec<String> {
        self.inner.ids().to_vec()
    }

    #[getter]
    fn metric(&self) -> &'static str {
        self.inner.metric().short_name()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        let n = self.inner.len();
        if i >= n || j >= n {
            return Err(value_error(format!(
                "index ({i}, {j}) out of range for {n} filters"
            )));
        }
        Ok(self.inner.get(i, j))
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        (0..self.inner.len())
            .map(|i| self.inner.row(i).to_vec())
            .collect()
    }

    fn to_tsv(&self) -> String {
        self.inner.to_tsv()
    }
}

/// The chosen filters and the search statistics.
#[pyclass(name = "Selection", module = "filtersel", frozen)]
struct PySelection {
    inner: SelectionResult,
}

#[pymethods]
impl PySelection {
    #[getter]
    fn indices(&self) -> Vec<usize> {
        self.inner.selection.indices().to_vec()
    }

    #[getter]
    fn ids(&self) -> Vec<String> {
        self.inner.selected_ids.clone()
    }

    #[getter]
    fn achieved_min_distance(&self) -> f64 {
        self.inner.achieved_min_distance
    }

    #[getter]
    fn theta_bounds(&self) -> (f64, f64) {
        let b = self.inner.theta_bounds_final;
        (b.lo, b.hi)
    }

    #[getter]
    fn iterations_run(&self) -> usize {
        self.inner.iterations_run
    }

    #[getter]
    fn feasibility_calls(&self) -> usize {
        self.inner.feasibility_calls
    }

    #[getter]
    fn search_nodes(&self) -> u64 {
        self.inner.search_nodes
    }

    #[getter]
    fn wall_time_s(&self) -> f64 {
        self.inner.wall_time_s
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(value_error)
    }

    fn __repr__(&self) -> String {
        format!(
            "Selection(ids={:?}, achieved_min_distance={})",
            self.inner.selected_ids, self.inner.achieved_min_distance
        )
    }
}

#[pyfunction(name = "fbs_select")]
#[pyo3(signature = (adjacency, k, iterations = 20, exact_max = false, literal_min = false, min_bracket = None))]
fn py_fbs_select(
    adjacency: &PyAdjacency,
    k: usize,
    iterations: usize,
    exact_max: bool,
    literal_min: bool,
    min_bracket: Option<f64>,
) -> PyResult<PySelection> {
    let cfg = FbsConfig {
        feasibility_mode: if exact_max {
            FeasibilityMode::ExactMax
        } else {
            FeasibilityMode::EarlyExit
        },
        literal_min,
        min_bracket,
        ..FbsConfig::new(k).with_iterations(iterations)
    };
    let inner = fbs_select(&adjacency.inner, &cfg).map_err(selection_error)?;
    Ok(PySelection { inner })
}

#[pyfunction(name = "full_search")]
#[pyo3(signature = (adjacency, k, guard = 1_000_000_000, prune = true))]
fn py_full_search(
    adjacency: &PyAdjacency,
    k: usize,
    guard: u128,
    prune: bool,
) -> PyResult<PySelection> {
    let inner = full_search_with(&adjacency.inner, k, FullSearchOptions { guard, prune })
        .map_err(selection_error)?;
    Ok(PySelection { inner })
}

/// Exact maximum independent set of the graph on `n` nodes with the given
/// conflict edges. With `target` and `exact=False` the search stops at the
/// first set of that size.
#[pyfunction(name = "max_independent_set")]
#[pyo3(signature = (n, edges, target = None, exact = true))]
fn py_max_independent_set(
    n: usize,
    edges: Vec<(usize, usize)>,
    target: Option<usize>,
    exact: bool,
) -> PyResult<Vec<usize>> {
    let graph = ConflictGraph::from_edges(n, &edges).map_err(selection_error)?;
    let mode = if exact {
        FeasibilityMode::ExactMax
    } else {
        FeasibilityMode::EarlyExit
    };
    Ok(max_independent_set(&graph, target, mode).indices().to_vec())
}

/// Labeled spectra sampled on one shared wavelength grid.
#[pyclass(name = "SpectrumSet", module = "filtersel", frozen)]
struct PySpectrumSet {
    inner: SpectrumSet,
}

#[pymethods]
impl PySpectrumSet {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn wavelengths(&self) -> Vec<f64> {
        self.inner.grid().samples().to_vec()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner
            .spectra()
            .iter()
            .map(|s| s.label().to_string())
            .collect()
    }

    #[getter]
    fn classes(&self) -> Vec<String> {
        self.inner.classes().to_vec()
    }

    fn values(&self) -> Vec<Vec<f64>> {
        self.inner
            .spectra()
            .iter()
            .map(|s| s.values().to_vec())
            .collect()
    }

    /// Class means scaled to unit norm.
    fn normalized_means(&self) -> PySpectrumSet {
        PySpectrumSet {
            inner: self.inner.average_by_class().l2_normalize(),
        }
    }

    fn to_csv(&self) -> String {
        self.inner.to_table().to_string(Delimiter::Comma)
    }
}

#[pyfunction(name = "load_spectra")]
#[pyo3(signature = (path, crop = None))]
fn py_load_spectra(path: &str, crop: Option<(f64, f64)>) -> PyResult<PySpectrumSet> {
    let file = File::open(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
    let inner = load_spectra(file, LoadOptions { crop }).map_err(value_error)?;
    Ok(PySpectrumSet { inner })
}

/// Seeded synthetic classification data: `(means, train, test)`.
#[pyfunction(name = "spectral_benchmark")]
#[pyo3(signature = (classes = 10, train_per_class = 25, test_per_class = 75, noise = 0.05, seed = 0, shared_base = None))]
fn py_spectral_benchmark(
    classes: usize,
    train_per_class: usize,
    test_per_class: usize,
    noise: f64,
    seed: u64,
    shared_base: Option<f64>,
) -> PyResult<(PySpectrumSet, PySpectrumSet, PySpectrumSet)> {
    if classes == 0 || train_per_class == 0 || test_per_class == 0 {
        return Err(value_error(
            "classes and per-class counts must be at least 1",
        ));
    }
    let family = match shared_base {
        Some(feature_amplitude) => SpectrumFamily::SharedBase { feature_amplitude },
        None => SpectrumFamily::Independent,
    };
    let b = spectral_benchmark(&BenchmarkConfig {
        family,
        classes,
        train_per_class,
        test_per_class,
        noise,
        seed,
        ..Default::default()
    });
    Ok((
        PySpectrumSet { inner: b.means },
        PySpectrumSet { inner: b.train },
        PySpectrumSet { inner: b.test },
    ))
}

/// Candidate bandpass filters sampled on a wavelength grid.
#[pyclass(name = "FilterBank", module = "filtersel", frozen)]
struct PyFilterBank {
    inner: FilterBank,
}

fn grid_of(wavelengths: Vec<f64>) -> PyResult<WavelengthGrid> {
    WavelengthGrid::new(wavelengths).map_err(value_error)
}

#[pymethods]
impl PyFilterBank {
    /// One equidistant bank per bandwidth, concatenated.
    #[staticmethod]
    #[pyo3(signature = (wavelengths, range, bandwidths, count_per_bandwidth, shape = "gaussian"))]
    fn sweep(
        wavelengths: Vec<f64>,
        range: (f64, f64),
        bandwidths: Vec<f64>,
        count_per_bandwidth: usize,
        shape: &str,
    ) -> PyResult<Self> {
        let grid = grid_of(wavelengths)?;
        let inner = make_sweep_bank(
            range,
            &bandwidths,
            count_per_bandwidth,
            parse_shape(shape)?,
            &grid,
        )
        .map_err(value_error)?;
        Ok(PyFilterBank { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (wavelengths, range, bandwidth, count, shape = "gaussian"))]
    fn uniform(
        wavelengths: Vec<f64>,
        range: (f64, f64),
        bandwidth: f64,
        count: usize,
        shape: &str,
    ) -> PyResult<Self> {
        let grid = grid_of(wavelengths)?;
        let inner = make_uniform_bank(count, range, bandwidth, parse_shape(shape)?, &grid)
            .map_err(value_error)?;
        Ok(PyFilterBank { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn ids(&self) -> Vec<String> {
        self.inner.ids()
    }

    /// Response table: one row per filter, one column per spectrum.
    fn responses(&self, spectra: &PySpectrumSet) -> Vec<Vec<f64>> {
        let m = integrate_responses(&self.inner, &spectra.inner);
        (0..m.filter_count()).map(|i| m.row(i).to_vec()).collect()
    }

    /// Pairwise distances between the filters' responses to `spectra`.
    #[pyo3(signature = (spectra, metric = "angle"))]
    fn adjacency(&self, spectra: &PySpectrumSet, metric: &str) -> PyResult<PyAdjacency> {
        let m = integrate_responses(&self.inner, &spectra.inner);
        let inner = build_adjacency(&m, parse_metric(metric)?).map_err(value_error)?;
        Ok(PyAdjacency { inner })
    }
}

/// Nearest-reference spectral angle classifier.
#[pyclass(name = "Model", module = "filtersel", frozen)]
struct PyModel {
    inner: TrainedModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = TrainedModel::from_json(text).map_err(value_error)?;
        Ok(PyModel { inner })
    }

    #[getter]
    fn bands(&self) -> Vec<String> {
        self.inner.recorder.band_ids()
    }

    #[getter]
    fn classes(&self) -> Vec<String> {
        self.inner.classes()
    }

    #[getter]
    fn selection(&self) -> Option<PySelection> {
        self.inner
            .selection
            .clone()
            .map(|inner| PySelection { inner })
    }

    /// Predicted label of every spectrum in `spectra`.
    fn classify(&self, spectra: &PySpectrumSet) -> PyResult<Vec<String>> {
        spectra
            .inner
            .spectra()
            .iter()
            .map(|s| {
                self.inner
                    .classify(s)
                    .map(str::to_string)
                    .map_err(value_error)
            })
            .collect()
    }

    /// `(total, wrong, classes, confusion)` with `confusion[truth][predicted]`.
    fn evaluate(
        &self,
        spectra: &PySpectrumSet,
    ) -> PyResult<(usize, usize, Vec<String>, Vec<Vec<usize>>)> {
        let r = self
            .inner
            .evaluate(spectra.inner.spectra())
            .map_err(value_error)?;
        Ok((r.total, r.wrong, r.classes, r.confusion))
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(value_error)
    }
}

/// Selects `k` filters from `bank` on the normalized class means of
/// `training` and builds the classifier.
#[pyfunction(name = "train")]
#[pyo3(signature = (training, bank, k, metric = "angle", iterations = 20))]
fn py_train(
    training: &PySpectrumSet,
    bank: &PyFilterBank,
    k: usize,
    metric: &str,
    iterations: usize,
) -> PyResult<PyModel> {
    let cfg = FbsConfig::new(k).with_iterations(iterations);
    let inner = filtersel::train(&training.inner, &bank.inner, &cfg, parse_metric(metric)?)
        .map_err(value_error)?;
    Ok(PyModel { inner })
}

#[pymodule]
#[pyo3(name = "filtersel")]
fn filtersel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("GuardExceeded", m.py().get_type::<GuardExceeded>())?;
    m.add_class::<PyAdjacency>()?;
    m.add_class::<PySelection>()?;
    m.add_class::<PySpectrumSet>()?;
    m.add_class::<PyFilterBank>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(spectral_angle, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_information_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_correlation_angle, m)?)?;
    m.add_function(wrap_pyfunction!(py_fbs_select, m)?)?;
    m.add_function(wrap_pyfunction!(py_full_search, m)?)?;
    m.add_function(wrap_pyfunction!(py_max_independent_set, m)?)?;
    m.add_function(wrap_pyfunction!(py_load_spectra, m)?)?;
    m.add_function(wrap_pyfunction!(py_spectral_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(py_train, m)?)?;
    Ok(())
}
