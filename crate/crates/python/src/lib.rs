use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use edgeimpact_core::graph_model::{
    build_network_with, complete_graph, erdos_renyi, grid_graph, path_graph, read_network,
    write_network, ErdosRenyi, NetworkFile,
};
use edgeimpact_core::stable_analysis::{greedy_gramian_improve, ScanOptions, SortKey};
use edgeimpact_core::{laplacian_analysis, EdgeMod, NetworkKind, SpectralCondition};

fn py_err(e: edgeimpact_core::Error) -> PyErr {
    if e.is_parse_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn parse_kind(kind: &str) -> PyResult<NetworkKind> {
    match kind {
        "direct" => Ok(NetworkKind::DirectStable),
        "laplacian" => Ok(NetworkKind::Laplacian),
        other => Err(PyValueError::new_err(format!("unknown kind {other:?}"))),
    }
}

fn parse_condition(condition: &str) -> PyResult<SpectralCondition> {
    match condition {
        "strict" => Ok(SpectralCondition::Strict),
        "displacement" => Ok(SpectralCondition::Displacement),
        other => Err(PyValueError::new_err(format!("unknown condition {other:?}"))),
    }
}

fn parse_sort(sort: &str) -> PyResult<SortKey> {
    match sort {
        "margin" => Ok(SortKey::Margin),
        "hinf" => Ok(SortKey::Hinf),
        "h2" => Ok(SortKey::H2),
        "edge" => Ok(SortKey::Edge),
        other => Err(PyValueError::new_err(format!("unknown sort key {other:?}"))),
    }
}

/// A direct or Laplacian network with its input and output terminals.
#[pyclass(frozen, skip_from_py_object, module = "edgeimpact")]
#[derive(Clone)]
struct Network {
    inner: edgeimpact_core::Network,
}

#[pymethods]
impl Network {
    #[new]
    #[pyo3(signature = (n, edges, inputs, outputs, kind = "direct", condition = "strict"))]
    fn new(
        n: usize,
        edges: Vec<(usize, usize, f64)>,
        inputs: Vec<usize>,
        outputs: Vec<usize>,
        kind: &str,
        condition: &str,
    ) -> PyResult<Self> {
        let inner = build_network_with(n, &edges, &inputs, &outputs, parse_kind(kind)?, parse_condition(condition)?)
            .map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: read_network(path).map_err(py_err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let file = NetworkFile::from_json(text).map_err(py_err)?;
        Ok(Self { inner: file.into_network().map_err(py_err)? })
    }

    #[staticmethod]
    fn path(n: usize, w: f64) -> PyResult<Self> {
        Ok(Self { inner: path_graph(n, w).map_err(py_err)? })
    }

    #[staticmethod]
    fn complete(n: usize, w: f64) -> PyResult<Self> {
        Ok(Self { inner: complete_graph(n, w).map_err(py_err)? })
    }

    #[staticmethod]
    fn grid(rows: usize, cols: usize, w: f64) -> PyResult<Self> {
        Ok(Self { inner: grid_graph(rows, cols, w).map_err(py_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (n, p, rho, seed, directed = true, inputs = None, outputs = None))]
    fn erdos_renyi(
        n: usize,
        p: f64,
        rho: f64,
        seed: u64,
        directed: bool,
        inputs: Option<usize>,
        outputs: Option<usize>,
    ) -> PyResult<Self> {
        let cfg = ErdosRenyi {
            directed,
            inputs,
            outputs,
            ..ErdosRenyi::new(n, p, rho, seed)
        };
        Ok(Self { inner: erdos_renyi(&cfg).map_err(py_err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        write_network(&self.inner, path).map_err(py_err)
    }

    fn to_json(&self) -> String {
        NetworkFile::from(&self.inner).to_json()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().as_str()
    }

    #[getter]
    fn condition(&self) -> &'static str {
        self.inner.condition().as_str()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.inner.edges()
    }

    #[getter]
    fn inputs(&self) -> Vec<usize> {
        self.inner.inputs().to_vec()
    }

    #[getter]
    fn outputs(&self) -> Vec<usize> {
        self.inner.outputs().to_vec()
    }

    fn weight(&self, s: usize, t: usize) -> f64 {
        self.inner.weight(s, t)
    }

    fn spectral_radius(&self) -> f64 {
        self.inner.spectral_radius()
    }

    fn laplacian_spectral_radius(&self) -> f64 {
        self.inner.laplacian_spectral_radius()
    }

    fn hop_diameter(&self) -> Option<usize> {
        self.inner.hop_diameter()
    }

    /// Copy with `w` added to the weight of `s -> t`.
    fn apply_mod(&self, s: usize, t: usize, w: f64) -> PyResult<Self> {
        Ok(Self { inner: self.inner.apply_mod(&EdgeMod::new(s, t, w)).map_err(py_err)? })
    }

    fn with_condition(&self, condition: &str) -> PyResult<Self> {
        Ok(Self { inner: self.inner.with_condition(parse_condition(condition)?).map_err(py_err)? })
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(n={}, kind={:?}, edges={})",
            self.inner.n(),
            self.inner.kind().as_str(),
            self.inner.edge_count()
        )
    }
}

/// Margins and delta norms of a stable direct network.
#[pyclass(frozen, module = "edgeimpact")]
struct SteadyStateKernel {
    inner: edgeimpact_core::SteadyStateKernel,
}

#[pymethods]
impl SteadyStateKernel {
    #[new]
    fn new(net: &Network) -> PyResult<Self> {
        Ok(Self { inner: edgeimpact_core::SteadyStateKernel::build(&net.inner).map_err(py_err)? })
    }

    fn stability_margin(&self, s: usize, t: usize) -> PyResult<f64> {
        self.inner.stability_margin(s, t).map_err(py_err)
    }

    fn delta_hinf(&self, s: usize, t: usize, w: f64) -> PyResult<f64> {
        self.inner.delta_hinf(&EdgeMod::new(s, t, w)).map_err(py_err)
    }

    fn delta_h2_lower_bound(&self, s: usize, t: usize, w: f64) -> PyResult<f64> {
        self.inner.delta_h2_lower_bound(&EdgeMod::new(s, t, w)).map_err(py_err)
    }

    /// `(radius, (s, t))`, or `(inf, None)` when every margin is infinite.
    fn fragility_radius(&self) -> (f64, Option<(usize, usize)>) {
        let (r, edge) = self.inner.fragility_radius();
        (r, edge.map(|e| (e.s, e.t)))
    }

    /// Rows `(s, t, margin, destabilizing, hinf, h2_lower_bound)`.
    #[pyo3(signature = (w, sort = "hinf", top_k = None))]
    fn scan(
        &self,
        py: Python<'_>,
        w: f64,
        sort: &str,
        top_k: Option<usize>,
    ) -> PyResult<Vec<(usize, usize, f64, bool, f64, f64)>> {
        let opts = ScanOptions { sort: parse_sort(sort)?, top_k, parallel: true };
        let reports = py.detach(|| self.inner.batch_scan(w, &opts)).map_err(py_err)?;
        Ok(reports
            .into_iter()
            .map(|r| (r.s, r.t, r.margin, r.destabilizing, r.hinf, r.h2_lower_bound))
            .collect())
    }
}

/// Coherence and addition effects for a Laplacian network.
#[pyclass(frozen, module = "edgeimpact")]
struct LaplacianKernel {
    inner: edgeimpact_core::LaplacianKernel,
}

#[pymethods]
impl LaplacianKernel {
    #[new]
    fn new(net: &Network) -> PyResult<Self> {
        Ok(Self { inner: edgeimpact_core::LaplacianKernel::build(&net.inner).map_err(py_err)? })
    }

    fn coherence(&self) -> PyResult<f64> {
        self.inner.coherence().map_err(py_err)
    }

    fn coherence_plus_one(&self) -> PyResult<f64> {
        self.inner.coherence_plus_one().map_err(py_err)
    }

    fn coherence_delta(&self, s: usize, t: usize, w: f64) -> PyResult<f64> {
        self.inner.coherence_delta(&EdgeMod::new(s, t, w)).map_err(py_err)
    }

    fn delta_hinf_upper_bound(&self, s: usize, t: usize, w: f64) -> PyResult<f64> {
        self.inner.delta_hinf_upper_bound(&EdgeMod::new(s, t, w)).map_err(py_err)
    }

    fn addition_admissible(&self, s: usize, t: usize, w: f64) -> bool {
        self.inner.addition_admissible(s, t, w)
    }

    fn effective_resistance(&self, s: usize, t: usize) -> f64 {
        self.inner.effective_resistance(s, t)
    }

    /// Rows `(s, t, coherence_delta, admissible)` for every pair `s < t`.
    fn coherence_map(&self, py: Python<'_>, w: f64) -> PyResult<Vec<(usize, usize, f64, bool)>> {
        let report = py.detach(|| self.inner.batch_coherence_delta(w)).map_err(py_err)?;
        Ok(report.pairs())
    }
}

/// Greedy coherence reduction. Returns `(trajectory, edges, grown_network)`.
#[pyfunction]
fn greedy_grow(
    py: Python<'_>,
    net: &Network,
    w: f64,
    budget: usize,
) -> PyResult<(Vec<f64>, Vec<(usize, usize)>, Network)> {
    let (result, grown) = py
        .detach(|| laplacian_analysis::greedy_grow(&net.inner, w, budget))
        .map_err(py_err)?;
    let edges = result.steps.iter().map(|s| (s.s, s.t)).collect();
    Ok((result.trajectory(), edges, Network { inner: grown }))
}

/// Greedy output-energy growth. Returns `(traces, edges)` where `traces`
/// starts with the initial value.
#[pyfunction]
fn greedy_gramian(
    py: Python<'_>,
    net: &Network,
    budget: usize,
    w: f64,
) -> PyResult<(Vec<f64>, Vec<(usize, usize)>)> {
    let result = py
        .detach(|| greedy_gramian_improve(&net.inner, budget, w))
        .map_err(py_err)?;
    let traces = std::iter::once(result.initial_trace)
        .chain(result.steps.iter().map(|s| s.trace))
        .collect();
    let edges = result.steps.iter().map(|s| (s.edge.s, s.edge.t)).collect();
    Ok((traces, edges))
}

#[pymodule]
fn edgeimpact(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Network>()?;
    m.add_class::<SteadyStateKernel>()?;
    m.add_class::<LaplacianKernel>()?;
    m.add_function(wrap_pyfunction!(greedy_grow, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_gramian, m)?)?;
    Ok(())
}
