//! Python bindings: the demo hull model, the high-fidelity solver, the
//! POD-GPR surrogates, non-dominated sorting, and the end-to-end pipeline.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hullopt_core::criteria::{self, PenaltyConfig, QoiVector};
use hullopt_core::model::{
    build_demo_model, solve_hifi, Configuration, HullModel, ModelSpec, ParameterSpace,
    StressSnapshot,
};
use hullopt_core::moo;
use hullopt_core::pipeline::{self, init_run_dir, PipelineConfig, RunState};
use hullopt_core::rom::{surrogate_fit, GprConfig, RankPolicy, SnapshotDatabase, SurrogateModel};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn qois_dict(py: Python<'_>, q: &QoiVector, penalized: f64) -> PyResult<Py<PyDict>> {
    let d = PyDict::new(py);
    d.set_item("n_y", q.n_y)?;
    d.set_item("n_b", q.n_b)?;
    d.set_item("deflection_mm", q.deflection)?;
    d.set_item("mass_t", q.mass)?;
    d.set_item("vcg_m", q.vcg)?;
    d.set_item("penalized_t", penalized)?;
    Ok(d.into())
}

fn penalty_from_kwargs(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<PenaltyConfig> {
    let mut pen = PipelineConfig::default_for_demo().penalty;
    if let Some(kwargs) = kwargs {
        for (key, value) in kwargs.iter() {
            let key: String = key.extract()?;
            match key.as_str() {
                "c_y" => pen.c_y = value.extract()?,
                "c_b" => pen.c_b = value.extract()?,
                "y_crit" => pen.y_crit = value.extract()?,
                "b_crit" => pen.b_crit = value.extract()?,
                "m_bar" => pen.m_bar = value.extract()?,
                "m_fixed" => pen.m_fixed = value.extract()?,
                "vcg_fixed" => pen.vcg_fixed = value.extract()?,
                "vcg_crit" => pen.vcg_crit = value.extract()?,
                "deflection_crit" => pen.deflection_crit = value.extract()?,
                other => {
                    return Err(PyValueError::new_err(format!(
                        "unknown penalty field {other}"
                    )))
                }
            }
        }
    }
    Ok(pen)
}

/// The synthetic parameterized hull with its discrete thickness domain.
#[pyclass]
struct Model {
    spec: ModelSpec,
    model: HullModel,
    space: ParameterSpace,
}

#[pymethods]
impl Model {
    /// The built-in five-region demo hull; `nx` overrides the grid columns.
    #[staticmethod]
    #[pyo3(signature = (nx=None))]
    fn demo(nx: Option<usize>) -> PyResult<Self> {
        let mut spec = ModelSpec::demo();
        if let Some(nx) = nx {
            spec.grid.nx = nx;
        }
        let (model, space) = build_demo_model(&spec).map_err(err)?;
        Ok(Self { spec, model, space })
    }

    /// Load a model spec from a TOML file.
    #[staticmethod]
    fn from_spec(path: PathBuf) -> PyResult<Self> {
        let spec = ModelSpec::from_path(&path).map_err(err)?;
        let (model, space) = build_demo_model(&spec).map_err(err)?;
        Ok(Self { spec, model, space })
    }

    #[getter]
    fn n_elements(&self) -> usize {
        self.model.n_elements()
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.model.n_nodes()
    }

    #[getter]
    fn n_params(&self) -> usize {
        self.space.n_params()
    }

    #[getter]
    fn param_labels(&self) -> Vec<String> {
        self.space.params.iter().map(|p| p.label.clone()).collect()
    }

    #[getter]
    fn domains(&self) -> HashMap<String, Vec<f64>> {
        self.space
            .params
            .iter()
            .map(|p| (p.label.clone(), p.domain.clone()))
            .collect()
    }

    fn default_config(&self) -> Vec<f64> {
        self.space.default_config().values
    }

    fn lower_bound_config(&self) -> Vec<f64> {
        self.space.lower_bound_config().values
    }

    fn total_configurations(&self) -> f64 {
        self.space.total_configurations()
    }

    /// The model spec as TOML, for saving or editing.
    fn spec_toml(&self) -> String {
        self.spec.to_toml()
    }

    /// High-fidelity solve of one configuration.
    fn solve(&self, values: Vec<f64>) -> PyResult<Snapshot> {
        let config = Configuration::new(values);
        let snapshot = solve_hifi(&self.model, &self.space, &config).map_err(err)?;
        Ok(Snapshot { snapshot })
    }

    /// High-fidelity QoIs of one configuration under the penalty constants.
    #[pyo3(signature = (values, **kwargs))]
    fn solve_qois(
        &self,
        py: Python<'_>,
        values: Vec<f64>,
        kwargs: Option<&Bound<'_, PyDict>>,
    ) -> PyResult<Py<PyDict>> {
        let pen = penalty_from_kwargs(kwargs)?;
        let config = Configuration::new(values);
        let snapshot = solve_hifi(&self.model, &self.space, &config).map_err(err)?;
        let thickness = self
            .model
            .thickness_map(&self.space, &config)
            .map_err(err)?;
        let qois = criteria::compute_qois(
            &snapshot,
            &self.model.elements,
            &self.model.patches,
            &self.model.material,
            &self.space,
            &pen,
            &thickness,
            self.model.monitored_node,
        )
        .map_err(err)?;
        qois_dict(py, &qois, criteria::penalized_mass(&qois, &pen))
    }

    fn __repr__(&self) -> String {
        format!(
            "Model({} elements, {} params, {} configurations)",
            self.model.n_elements(),
            self.space.n_params(),
            self.space.total_configurations()
        )
    }
}

/// Stress fields and displacements of one solved configuration.
#[pyclass]
struct Snapshot {
    snapshot: StressSnapshot,
}

#[pymethods]
impl Snapshot {
    /// Element stresses (MPa) of one component under one load case,
    /// e.g. `component("hogging", "sigma_x")`.
    fn component(&self, load_case: &str, component: &str) -> PyResult<Vec<f64>> {
        let case = self
            .snapshot
            .cases
            .iter()
            .find(|c| c.kind.name() == load_case)
            .ok_or_else(|| PyValueError::new_err(format!("unknown load case {load_case}")))?;
        let comp = hullopt_core::model::StressComponent::ALL
            .iter()
            .find(|c| c.name() == component)
            .ok_or_else(|| PyValueError::new_err(format!("unknown component {component}")))?;
        Ok(case.component(*comp).to_vec())
    }

    #[getter]
    fn config(&self) -> Vec<f64> {
        self.snapshot.config.values.clone()
    }
}

/// POD-GPR stress surrogate fitted on high-fidelity solves.
#[pyclass]
struct Surrogate {
    surrogate: SurrogateModel,
    model: HullModel,
    space: ParameterSpace,
    pen: PenaltyConfig,
}

#[pymethods]
impl Surrogate {
    /// Solves every configuration with the high-fidelity model and fits the
    /// 12 field surrogates plus the deflection regressors.
    #[staticmethod]
    #[pyo3(signature = (model, configs, tau=0.01, restarts=2, max_iters=60, seed=0, **kwargs))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        model: &Model,
        configs: Vec<Vec<f64>>,
        tau: f64,
        restarts: usize,
        max_iters: usize,
        seed: u64,
        kwargs: Option<&Bound<'_, PyDict>>,
    ) -> PyResult<Self> {
        let pen = penalty_from_kwargs(kwargs)?;
        let mut db = SnapshotDatabase::new();
        for values in configs {
            let config = Configuration::new(values);
            let snapshot = solve_hifi(&model.model, &model.space, &config).map_err(err)?;
            let thickness = model
                .model
                .thickness_map(&model.space, &config)
                .map_err(err)?;
            let qois = criteria::compute_qois(
                &snapshot,
                &model.model.elements,
                &model.model.patches,
                &model.model.material,
                &model.space,
                &pen,
                &thickness,
                model.model.monitored_node,
            )
            .map_err(err)?;
            db.insert(hullopt_core::rom::DbEntry {
                physical_key: model.model.physical_key(&model.space, &config),
                config,
                snapshot,
                qois,
                phase: hullopt_core::rom::Phase::InitialSample,
            })
            .map_err(err)?;
        }
        let gpr = GprConfig {
            restarts,
            max_iters,
            seed,
            ..GprConfig::default()
        };
        let surrogate = surrogate_fit(
            &db,
            &model.model,
            &model.space,
            &RankPolicy::Energy(tau),
            &gpr,
        )
        .map_err(err)?;
        Ok(Self {
            surrogate,
            model: model.model.clone(),
            space: model.space.clone(),
            pen,
        })
    }

    #[getter]
    fn rank(&self) -> usize {
        self.surrogate.rank
    }

    /// Surrogate QoIs for a batch of configurations.
    fn predict_qois(&self, py: Python<'_>, configs: Vec<Vec<f64>>) -> PyResult<Vec<Py<PyDict>>> {
        let configs: Vec<Configuration> = configs.into_iter().map(Configuration::new).collect();
        let qois = self
            .surrogate
            .predict_qois(&self.model, &self.space, &self.pen, &configs)
            .map_err(err)?;
        qois.iter()
            .map(|q| qois_dict(py, q, criteria::penalized_mass(q, &self.pen)))
            .collect()
    }
}

/// Layered non-dominated sort of a minimization objective matrix.
#[pyfunction]
fn non_dominated_sort(objectives: Vec<Vec<f64>>) -> Vec<Vec<usize>> {
    moo::non_dominated_sort(&objectives)
}

/// Exact dominated hypervolume of a minimization point set.
#[pyfunction]
fn hypervolume(points: Vec<Vec<f64>>, reference: Vec<f64>) -> f64 {
    moo::hypervolume(&points, &reference)
}

/// Full pipeline run in a fresh run directory; returns the stage table.
#[pyfunction]
#[pyo3(signature = (run_dir, seed=0, nx=None, quick=true))]
fn run_pipeline(
    py: Python<'_>,
    run_dir: PathBuf,
    seed: u64,
    nx: Option<usize>,
    quick: bool,
) -> PyResult<Vec<Py<PyDict>>> {
    let mut spec = ModelSpec::demo();
    if let Some(nx) = nx {
        spec.grid.nx = nx;
    }
    let mut cfg = if quick {
        PipelineConfig::quick_demo()
    } else {
        PipelineConfig::default_for_demo()
    };
    cfg.seed = seed;
    init_run_dir(&run_dir, &spec, &cfg).map_err(err)?;
    let stages = pipeline::run(&run_dir).map_err(err)?;
    stages
        .iter()
        .map(|s| {
            let d = PyDict::new(py);
            d.set_item("stage", s.stage)?;
            d.set_item("n_params", s.n_params)?;
            d.set_item("hf_evals", s.hf_evals_total)?;
            d.set_item("m_gap_percent", s.mass_gap_percent)?;
            d.set_item("penalized_t", s.penalized)?;
            d.set_item("n_y", s.qois.n_y)?;
            d.set_item("n_b", s.qois.n_b)?;
            d.set_item("config", s.incumbent_config.clone())?;
            Ok(d.into())
        })
        .collect()
}

/// Incumbent summary of an existing run directory.
#[pyfunction]
fn incumbent(py: Python<'_>, run_dir: PathBuf) -> PyResult<Py<PyDict>> {
    let st = RunState::open(&run_dir).map_err(err)?;
    let summary = pipeline::incumbent_summary(&st)
        .map_err(err)?
        .ok_or_else(|| PyRuntimeError::new_err("no feasible incumbent"))?;
    let d = PyDict::new(py);
    d.set_item("config", summary.config)?;
    d.set_item("penalized_t", summary.penalized)?;
    d.set_item("mass_gap_percent", summary.mass_gap_percent)?;
    d.set_item("n_y", summary.qois.n_y)?;
    d.set_item("n_b", summary.qois.n_b)?;
    d.set_item("hf_evals", summary.hf_evals)?;
    d.set_item("n_params", summary.n_params)?;
    Ok(d.into())
}

#[pymodule]
fn hullopt_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<Snapshot>()?;
    m.add_class::<Surrogate>()?;
    m.add_function(wrap_pyfunction!(non_dominated_sort, m)?)?;
    m.add_function(wrap_pyfunction!(hypervolume, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(incumbent, m)?)?;
    Ok(())
}
