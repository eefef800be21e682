//! Python bindings: datasets, DAGs, placement problems and the solvers.
//!
//! Structured results cross the boundary as JSON and come back as plain
//! Python dicts.

use std::time::Duration;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cep_place::daggen;
use cep_place::dataflow::{propagate_rates, DagFile, QueryDag};
use cep_place::experiment::{self, ExperimentConfig};
use cep_place::placement::{Placement, Problem};
use cep_place::solver::baselines::{solve_cloud_only, solve_random};
use cep_place::solver::bf::{solve_bf, BfOptions};
use cep_place::solver::ga::{solve_ga, GaConfig};
use cep_place::solver::Solution;
use cep_place::{BenchmarkDataset, EnergyConfig, ResourcePool, RuntimeScenario, Setup};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pyclass(name = "Dataset")]
struct PyDataset {
    inner: BenchmarkDataset,
}

#[pymethods]
impl PyDataset {
    /// A bundled dataset name, a `bundled:` spec or a file path.
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(PyDataset {
            inner: BenchmarkDataset::open(spec).map_err(err)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    fn variants(&self) -> Vec<String> {
        self.inner.variants.iter().map(|v| v.id.clone()).collect()
    }
}

#[pyclass(name = "Dag")]
struct PyDag {
    inner: QueryDag,
}

#[pymethods]
impl PyDag {
    #[staticmethod]
    fn from_json(text: &str, dataset: PyRef<'_, PyDataset>) -> PyResult<Self> {
        let file: DagFile = serde_json::from_str(text).map_err(err)?;
        let inner = QueryDag::from_file(&file, |id| dataset.inner.variant(id).cloned()).map_err(err)?;
        Ok(PyDag { inner })
    }

    /// A random DAG that passes the feasibility screens.
    #[staticmethod]
    #[pyo3(signature = (n_vertices, n_sources, max_out_degree, dataset, seed=0))]
    fn generate(
        n_vertices: usize,
        n_sources: usize,
        max_out_degree: usize,
        dataset: PyRef<'_, PyDataset>,
        seed: u64,
    ) -> PyResult<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (inner, _) = daggen::generate_screened(
            n_vertices,
            n_sources,
            max_out_degree,
            &dataset.inner,
            daggen::DEFAULT_MAX_ATTEMPTS,
            &mut rng,
        )
        .map_err(err)?;
        Ok(PyDag { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner.to_file()).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.vertices().iter().map(|v| v.id.clone()).collect()
    }

    fn sources(&self) -> Vec<usize> {
        self.inner.sources().to_vec()
    }

    fn sinks(&self) -> Vec<usize> {
        self.inner.sinks().to_vec()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().to_vec()
    }

    /// Expected per-vertex rates and overall selectivity at `input_rate`.
    fn rates(&self, py: Python<'_>, input_rate: f64) -> PyResult<Py<PyAny>> {
        if !(input_rate > 0.0) {
            return Err(err("input rate must be positive"));
        }
        let r = propagate_rates(&self.inner, input_rate);
        to_py(py, &serde_json::to_value(r).map_err(err)?)
    }
}

/// A DAG with sampled runtime parameters and a resource pool.
#[pyclass(name = "Problem")]
struct PyProblem {
    dag: QueryDag,
    scenario: RuntimeScenario,
    pool: ResourcePool,
    overheads: cep_place::profiles::Overheads,
}

impl PyProblem {
    fn problem(&self) -> PyResult<Problem<'_>> {
        Problem::new(&self.dag, &self.scenario, &self.pool, self.overheads).map_err(err)
    }

    fn report(&self, py: Python<'_>, sol: &Solution) -> PyResult<Py<PyAny>> {
        let mut v = sol.evaluation.report(&self.dag, &sol.placement, &self.pool);
        v["placement"] = sol.placement.assignment.clone().into();
        to_py(py, &v)
    }
}

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (dag, dataset, setup="liberal", rate=1000.0, seed=0))]
    fn new(dag: PyRef<'_, PyDag>, dataset: PyRef<'_, PyDataset>, setup: &str, rate: f64, seed: u64) -> PyResult<Self> {
        let setup: Setup = setup.parse().map_err(err)?;
        if !(rate > 0.0) {
            return Err(err("input rate must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scenario = RuntimeScenario::materialize(&dag.inner, &dataset.inner, rate, &mut rng).map_err(err)?;
        let pool = ResourcePool::build(setup, dag.inner.len(), EnergyConfig::default());
        let p = PyProblem {
            dag: dag.inner.clone(),
            scenario,
            pool,
            overheads: dataset.inner.overhead,
        };
        p.problem()?;
        Ok(p)
    }

    #[getter]
    fn unpinned(&self) -> PyResult<Vec<usize>> {
        Ok(self.problem()?.unpinned().to_vec())
    }

    #[getter]
    fn resource_ids(&self) -> Vec<String> {
        (0..self.pool.len()).map(|r| self.pool.id(r).to_string()).collect()
    }

    /// Evaluates a full assignment (one resource index per vertex).
    fn evaluate(&self, py: Python<'_>, assignment: Vec<usize>) -> PyResult<Py<PyAny>> {
        let p = self.problem()?;
        let placement = Placement { assignment };
        let evaluation = p.evaluate(&placement).map_err(err)?;
        self.report(py, &Solution { placement, evaluation })
    }

    fn rate_headroom(&self, assignment: Vec<usize>) -> PyResult<f64> {
        self.problem()?.rate_headroom(&Placement { assignment }).map_err(err)
    }

    #[pyo3(signature = (seed=0, min_generations=None, population=None, selection=None))]
    fn solve_ga(
        &self,
        py: Python<'_>,
        seed: u64,
        min_generations: Option<u64>,
        population: Option<usize>,
        selection: Option<&str>,
    ) -> PyResult<Py<PyAny>> {
        let d = GaConfig::default();
        let cfg = GaConfig {
            seed,
            min_generations: min_generations.unwrap_or(d.min_generations),
            population: population.unwrap_or(d.population),
            selection: match selection {
                Some(s) => s.parse().map_err(err)?,
                None => d.selection,
            },
            ..d
        };
        cfg.check().map_err(err)?;
        let out = solve_ga(&self.problem()?, &cfg).map_err(err)?;
        let report = self.report(py, &out.best)?;
        report.bind(py).set_item("generations", out.generations)?;
        Ok(report)
    }

    #[pyo3(signature = (prune=true, budget_secs=None))]
    fn solve_bf(&self, py: Python<'_>, prune: bool, budget_secs: Option<f64>) -> PyResult<Py<PyAny>> {
        let opts = BfOptions {
            prune,
            budget: budget_secs.map(Duration::from_secs_f64),
        };
        let out = solve_bf(&self.problem()?, opts).map_err(err)?;
        let report = self.report(py, &out.best)?;
        report.bind(py).set_item("evaluations", out.evaluations)?;
        Ok(report)
    }

    #[pyo3(signature = (trials=15000, seed=0))]
    fn solve_random(&self, py: Python<'_>, trials: usize, seed: u64) -> PyResult<Py<PyAny>> {
        let sol = solve_random(&self.problem()?, trials, seed).map_err(err)?;
        self.report(py, &sol)
    }

    fn solve_cloud_only(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let sol = solve_cloud_only(&self.problem()?).map_err(err)?;
        self.report(py, &sol)
    }
}

/// Runs a study from a JSON config string and returns the summary rows.
#[pyfunction]
#[pyo3(signature = (config_json, out_dir=None))]
fn run_experiment(py: Python<'_>, config_json: &str, out_dir: Option<&str>) -> PyResult<Py<PyAny>> {
    let cfg: ExperimentConfig = serde_json::from_str(config_json).map_err(err)?;
    let report = experiment::run_experiment(&cfg, out_dir.map(std::path::Path::new)).map_err(err)?;
    to_py(py, &serde_json::to_value(&report.summary).map_err(err)?)
}

#[pymodule]
fn cep_place_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyDag>()?;
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
