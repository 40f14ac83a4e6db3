//! Python bindings: genomes, the surrogate evaluator, the optimizer building
//! blocks, the statistics, and the experiment pipeline.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use gaitevo_core::analysis;
use gaitevo_core::experiment::{self, ExperimentConfig, ReevalOptions};
use gaitevo_core::nsga2::{self, EvolutionConfig, SurrogateEvaluator};
use gaitevo_core::params::{self, PARAMS};
use gaitevo_core::surrogate::{self, SurfaceModel, SurrogateConfig};
use gaitevo_core::{Fitness, FitnessConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: anyhow::Error) -> PyErr {
    PyRuntimeError::new_err(format!("{e:#}"))
}

/// 18 normalized parameters in [0, 1].
#[pyclass(name = "Genome", module = "gaitevo", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGenome(params::Genome);

#[pymethods]
impl PyGenome {
    #[new]
    fn new(values: Vec<f64>) -> PyResult<Self> {
        params::Genome::from_slice(&values)
            .map(Self)
            .map_err(value_err)
    }

    /// Parses the comma-separated form used in run logs.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        text.parse().map(Self).map_err(value_err)
    }

    /// Encodes phenotype values given in schema order.
    #[staticmethod]
    fn encode(phenotype: Vec<f64>) -> PyResult<Self> {
        let v: [f64; params::GENOME_LEN] = phenotype
            .try_into()
            .map_err(|v: Vec<f64>| value_err(format!("expected 18 values, got {}", v.len())))?;
        params::encode(&params::GaitSpec::from_values(&v))
            .map(Self)
            .map_err(value_err)
    }

    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    /// Phenotype values in schema order.
    fn decode(&self) -> Vec<f64> {
        params::decode(&self.0).to_values().to_vec()
    }

    /// Phenotype as `{name: value}`.
    fn phenotype(&self) -> Vec<(&'static str, f64)> {
        PARAMS.iter().map(|p| p.name).zip(self.decode()).collect()
    }

    fn __len__(&self) -> usize {
        params::GENOME_LEN
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Genome([{}])", self.0)
    }
}

#[pyclass(name = "Fitness", module = "gaitevo", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyFitness(Fitness);

#[pymethods]
impl PyFitness {
    #[new]
    fn new(speed: f64, stability: f64) -> Self {
        Self(Fitness::new(speed, stability))
    }

    /// Net speed in m/min.
    #[getter]
    fn speed(&self) -> f64 {
        self.0.speed
    }

    /// Scaled stability in [-1, 0].
    #[getter]
    fn stability(&self) -> f64 {
        self.0.stability
    }

    fn dominates(&self, other: &PyFitness) -> bool {
        self.0.dominates(&other.0)
    }

    fn __repr__(&self) -> String {
        format!(
            "Fitness(speed={}, stability={})",
            self.0.speed, self.0.stability
        )
    }
}

#[pyclass(name = "Surface", module = "gaitevo", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySurface(SurfaceModel);

#[pymethods]
impl PySurface {
    #[new]
    fn new(name: &str, hardness: f64, roughness: f64, friction: f64) -> PyResult<Self> {
        let s = SurfaceModel::new(name, hardness, roughness, friction);
        s.validate().map_err(value_err)?;
        Ok(Self(s))
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name.clone()
    }

    #[getter]
    fn hardness(&self) -> f64 {
        self.0.hardness
    }

    #[getter]
    fn roughness(&self) -> f64 {
        self.0.roughness
    }

    #[getter]
    fn friction(&self) -> f64 {
        self.0.friction
    }

    fn __repr__(&self) -> String {
        format!(
            "Surface({:?}, hardness={}, roughness={}, friction={})",
            self.0.name, self.0.hardness, self.0.roughness, self.0.friction
        )
    }
}

fn resolve_surface(arg: &Bound<'_, PyAny>) -> PyResult<SurfaceModel> {
    if let Ok(s) = arg.cast::<PySurface>() {
        return Ok(s.get().0.clone());
    }
    let name: String = arg.extract()?;
    surrogate::surface_library()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| value_err(format!("unknown surface {name}")))
}

/// Parameter names in schema order.
#[pyfunction]
fn param_names() -> Vec<&'static str> {
    PARAMS.iter().map(|p| p.name).collect()
}

/// `(name, low, high)` phenotype ranges in schema order.
#[pyfunction]
fn param_ranges() -> Vec<(&'static str, f64, f64)> {
    PARAMS.iter().map(|p| (p.name, p.lo, p.hi)).collect()
}

/// The four library surfaces A-D.
#[pyfunction]
fn surfaces() -> Vec<PySurface> {
    surrogate::surface_library()
        .into_iter()
        .map(PySurface)
        .collect()
}

/// Evaluates a genome once; returns `(Fitness, outcome)`.
#[pyfunction]
#[pyo3(signature = (genome, surface, seed=0))]
fn evaluate(
    py: Python<'_>,
    genome: &PyGenome,
    surface: &Bound<'_, PyAny>,
    seed: u64,
) -> PyResult<(PyFitness, String)> {
    let surface = resolve_surface(surface)?;
    let g = genome.0;
    let e = py.detach(move || {
        gaitevo_core::fitness::evaluate(
            &params::decode(&g),
            &surface,
            seed,
            &FitnessConfig::default(),
        )
    });
    let e = e.map_err(value_err)?;
    Ok((PyFitness(e.fitness), e.outcome.as_str().to_string()))
}

/// Sensor trace of one rollout as a dict of lists.
#[pyfunction]
#[pyo3(signature = (genome, surface, seed=0))]
fn rollout<'py>(
    py: Python<'py>,
    genome: &PyGenome,
    surface: &Bound<'py, PyAny>,
    seed: u64,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let surface = resolve_surface(surface)?;
    let g = genome.0;
    let trace = py
        .detach(move || surrogate::rollout(&params::decode(&g), &surface, seed))
        .map_err(value_err)?;
    let d = pyo3::types::PyDict::new(py);
    let times: Vec<f64> = (0..trace.len()).map(|i| trace.time(i)).collect();
    d.set_item("t", times)?;
    d.set_item("positions", trace.positions.clone())?;
    d.set_item("orientations", trace.orientations.clone())?;
    d.set_item("accelerations", trace.accelerations.clone())?;
    d.set_item("terminated_by", trace.terminated_by.as_str())?;
    Ok(d)
}

fn fitnesses(points: &[(f64, f64)]) -> Vec<Fitness> {
    points.iter().map(|&(s, t)| Fitness::new(s, t)).collect()
}

/// Non-dominated fronts of `(speed, stability)` pairs, as index lists.
#[pyfunction]
fn nondominated_fronts(points: Vec<(f64, f64)>) -> Vec<Vec<usize>> {
    nsga2::nondominated_fronts(&fitnesses(&points))
}

/// Crowding distance of each member of `front` (indices into `points`).
#[pyfunction]
fn crowding_distances(points: Vec<(f64, f64)>, front: Vec<usize>) -> PyResult<Vec<f64>> {
    if let Some(&bad) = front.iter().find(|&&i| i >= points.len()) {
        return Err(value_err(format!("front index {bad} out of range")));
    }
    Ok(nsga2::crowding_distances(&fitnesses(&points), &front))
}

/// Area dominated by `points` above the reference (0, -1).
#[pyfunction]
fn hypervolume(points: Vec<(f64, f64)>) -> f64 {
    analysis::hypervolume_2d(&fitnesses(&points), analysis::HV_REFERENCE)
}

/// Two-sided Mann-Whitney test; returns `(U, p, exact)`.
#[pyfunction]
fn mann_whitney_u(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64, bool)> {
    let r = analysis::mann_whitney_u(&x, &y).map_err(value_err)?;
    Ok((r.u, r.p, r.exact))
}

/// Holm step-down correction; returns `(p_adjusted, rejected)` per input.
#[pyfunction]
#[pyo3(signature = (p_values, alpha=0.01))]
fn holm_bonferroni(p_values: Vec<f64>, alpha: f64) -> Vec<(f64, bool)> {
    analysis::holm_bonferroni(&p_values, alpha)
        .into_iter()
        .map(|h| (h.p_adjusted, h.rejected))
        .collect()
}

type SignificanceRow = (&'static str, f64, f64, f64, bool);

/// Per-parameter tests between two groups of genomes:
/// `(parameter, U, p_raw, p_adjusted, significant)`.
#[pyfunction]
#[pyo3(signature = (a, b, alpha=0.01))]
fn parameter_significance(
    a: Vec<PyRef<'_, PyGenome>>,
    b: Vec<PyRef<'_, PyGenome>>,
    alpha: f64,
) -> PyResult<Vec<SignificanceRow>> {
    let ga: Vec<_> = a.iter().map(|g| g.0).collect();
    let gb: Vec<_> = b.iter().map(|g| g.0).collect();
    Ok(analysis::parameter_significance(&ga, &gb, alpha)
        .map_err(value_err)?
        .into_iter()
        .map(|r| (r.parameter, r.u, r.p_raw, r.p_adjusted, r.significant))
        .collect())
}

/// Runs one evolution on a library surface. Returns the evaluation records
/// as dicts in evaluation order.
#[pyfunction]
#[pyo3(signature = (surface="A", seed=0, population_size=8, generations=32, mutation_sigma=1.0/6.0))]
fn run_evolution<'py>(
    py: Python<'py>,
    surface: &str,
    seed: u64,
    population_size: usize,
    generations: usize,
    mutation_sigma: f64,
) -> PyResult<Vec<Bound<'py, pyo3::types::PyDict>>> {
    let model = surrogate::surface_library()
        .into_iter()
        .find(|s| s.name == surface)
        .ok_or_else(|| value_err(format!("unknown surface {surface}")))?;
    let cfg = EvolutionConfig {
        population_size,
        generations,
        mutation_sigma,
        rng_seed: seed,
        surface: surface.to_string(),
        ..EvolutionConfig::default()
    };
    let evaluator = SurrogateEvaluator {
        surface: model,
        fitness: cfg.fitness.clone(),
        model: SurrogateConfig::default(),
    };
    let log = py
        .detach(|| nsga2::run_evolution(&cfg, &evaluator))
        .map_err(value_err)?;
    log.records
        .iter()
        .map(|r| {
            let d = pyo3::types::PyDict::new(py);
            d.set_item("generation", r.generation)?;
            d.set_item("eval_index", r.eval_index)?;
            d.set_item("seed", r.seed)?;
            d.set_item("speed", r.fitness.speed)?;
            d.set_item("stability", r.fitness.stability)?;
            d.set_item("outcome", r.outcome.as_str())?;
            d.set_item("genome", PyGenome(r.genome))?;
            Ok(d)
        })
        .collect()
}

/// Runs the matrix described by a TOML config; returns the run log paths.
#[pyfunction]
#[pyo3(signature = (config, jobs=None))]
fn evolve(py: Python<'_>, config: PathBuf, jobs: Option<usize>) -> PyResult<Vec<PathBuf>> {
    let cfg = ExperimentConfig::load(&config).map_err(runtime_err)?;
    py.detach(|| experiment::evolve(&cfg, jobs))
        .map_err(runtime_err)
}

/// Re-evaluates front individuals; returns the number of rows written.
#[pyfunction]
#[pyo3(signature = (runs, out, seed=None, count=None, repeats=None, surfaces=None, jobs=None))]
#[allow(clippy::too_many_arguments)]
fn reevaluate(
    py: Python<'_>,
    runs: PathBuf,
    out: PathBuf,
    seed: Option<u64>,
    count: Option<usize>,
    repeats: Option<usize>,
    surfaces: Option<Vec<String>>,
    jobs: Option<usize>,
) -> PyResult<usize> {
    py.detach(|| {
        let (cfg, loaded) = experiment::load_runs(&runs)?;
        let mut opts = ReevalOptions::from_config(&cfg);
        opts.seed = seed.unwrap_or(opts.seed);
        opts.per_surface = count.unwrap_or(opts.per_surface);
        opts.repeats = repeats.unwrap_or(opts.repeats);
        if let Some(s) = surfaces {
            opts.surfaces = s;
        }
        let rows = experiment::reevaluate(&cfg, &loaded, &opts, jobs)?;
        experiment::store::write_reeval(&out, &rows)?;
        Ok(rows.len())
    })
    .map_err(runtime_err)
}

/// Writes the analysis bundle and returns the summary text.
#[pyfunction]
#[pyo3(signature = (runs, out, reeval=None))]
fn analyze(
    py: Python<'_>,
    runs: PathBuf,
    out: PathBuf,
    reeval: Option<PathBuf>,
) -> PyResult<String> {
    py.detach(|| {
        experiment::analyze(&runs, reeval.as_deref(), &out)?;
        Ok(std::fs::read_to_string(out.join("summary.txt"))?)
    })
    .map_err(runtime_err)
}

#[pyfunction]
fn export_plots(analysis: PathBuf, out: PathBuf) -> PyResult<Vec<PathBuf>> {
    experiment::export_plots(&analysis, &out).map_err(runtime_err)
}

#[pymodule]
fn gaitevo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGenome>()?;
    m.add_class::<PyFitness>()?;
    m.add_class::<PySurface>()?;
    m.add("GENOME_LEN", params::GENOME_LEN)?;
    m.add("SIGNIFICANCE_ALPHA", analysis::SIGNIFICANCE_ALPHA)?;
    m.add_function(wrap_pyfunction!(param_names, m)?)?;
    m.add_function(wrap_pyfunction!(param_ranges, m)?)?;
    m.add_function(wrap_pyfunction!(surfaces, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(rollout, m)?)?;
    m.add_function(wrap_pyfunction!(nondominated_fronts, m)?)?;
    m.add_function(wrap_pyfunction!(crowding_distances, m)?)?;
    m.add_function(wrap_pyfunction!(hypervolume, m)?)?;
    m.add_function(wrap_pyfunction!(mann_whitney_u, m)?)?;
    m.add_function(wrap_pyfunction!(holm_bonferroni, m)?)?;
    m.add_function(wrap_pyfunction!(parameter_significance, m)?)?;
    m.add_function(wrap_pyfunction!(run_evolution, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(reevaluate, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(export_plots, m)?)?;
    Ok(())
}
