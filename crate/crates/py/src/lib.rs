//! Python bindings. Worlds are ints on a finite space and lists of floats on
//! the cube; structured inputs (scenario fixtures, cube truth sets) are the
//! same JSON documents the CLI reads, passed as dicts or strings, and reports
//! come back as dicts.

use lka_core::asymptotics::{self, SyntheticScenario};
use lka_core::lka as ka;
use lka_core::maxent::{
    self, CubeFeature, FeatureSet, GibbsPosterior, MomentVector, SolverOptions,
};
use lka_core::scenarios::{self, ScenarioConfig, ScenarioKind};
use lka_core::secondary;
use lka_core::worlds::{self, BeliefMeasure, Metric, TruthSet, World, WorldSpace};
use lka_core::LkaError;
use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

create_exception!(
    lka,
    ValidationError,
    PyValueError,
    "Invalid input or configuration."
);
create_exception!(
    lka,
    NumericalError,
    PyArithmeticError,
    "Infeasible targets, singular systems, non-convergence."
);

fn py_err(e: LkaError) -> PyErr {
    if e.is_validation() {
        ValidationError::new_err(e.to_string())
    } else {
        NumericalError::new_err(e.to_string())
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for lka_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| NumericalError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

/// A dict (or JSON string) parsed into a library type.
fn from_py<T: DeserializeOwned>(py: Python<'_>, obj: &Bound<'_, PyAny>, what: &str) -> PyResult<T> {
    let s: String = match obj.extract::<String>() {
        Ok(s) => s,
        Err(_) => py
            .import("json")?
            .call_method1("dumps", (obj,))?
            .extract()?,
    };
    serde_json::from_str(&s).map_err(|e| ValidationError::new_err(format!("{what}: {e}")))
}

#[derive(serde::Deserialize)]
struct CubeSpec {
    r: usize,
    features: Vec<CubeFeature>,
}

/// Prior and features from either finite rows or a cube spec.
fn model(
    py: Python<'_>,
    features: Option<Vec<Vec<f64>>>,
    prior: Option<Vec<f64>>,
    cube: Option<&Bound<'_, PyAny>>,
) -> PyResult<(BeliefMeasure, FeatureSet)> {
    match (features, cube) {
        (Some(rows), None) => {
            let p0 = match prior {
                Some(w) => BeliefMeasure::finite_from_weights(&w).py()?,
                None => BeliefMeasure::uniform(&WorldSpace::finite(rows.len()).py()?),
            };
            if p0.space().size() != Some(rows.len()) {
                return Err(ValidationError::new_err("features: need one row per world"));
            }
            Ok((p0, FeatureSet::from_rows(&rows).py()?))
        }
        (None, Some(c)) => {
            if prior.is_some() {
                return Err(ValidationError::new_err("prior: the cube prior is uniform"));
            }
            let spec: CubeSpec = from_py(py, c, "cube")?;
            let f = FeatureSet::cube(spec.r, spec.features).py()?;
            Ok((BeliefMeasure::uniform(&WorldSpace::cube(spec.r).py()?), f))
        }
        _ => Err(ValidationError::new_err(
            "give exactly one of features or cube",
        )),
    }
}

fn world(obj: &Bound<'_, PyAny>) -> PyResult<World> {
    if let Ok(k) = obj.extract::<usize>() {
        return Ok(World::Index(k));
    }
    obj.extract::<Vec<f64>>()
        .map(World::Point)
        .map_err(|_| ValidationError::new_err("a world is an int or a list of floats"))
}

fn world_to_py<'py>(py: Python<'py>, x: &World) -> PyResult<Bound<'py, PyAny>> {
    match x {
        World::Index(k) => Ok(k.into_pyobject(py)?.into_any()),
        World::Point(p) => Ok(p.clone().into_pyobject(py)?.into_any()),
    }
}

/// Member indices on a finite space, or a truth-set document.
fn truth(py: Python<'_>, obj: &Bound<'_, PyAny>, space: &WorldSpace) -> PyResult<TruthSet> {
    let t = match (obj.extract::<Vec<usize>>(), space.size()) {
        (Ok(m), Some(d)) => TruthSet::finite(d, &m).py()?,
        _ => from_py(py, obj, "truth")?,
    };
    t.space.expect_same(space).py()?;
    Ok(t)
}

fn finite(p: Vec<f64>) -> PyResult<BeliefMeasure> {
    BeliefMeasure::finite(p).py()
}

/// A Gibbs posterior `P(x) ∝ P0(x) exp(λ·f(x))`.
#[pyclass(name = "Gibbs", module = "lka")]
struct PyGibbs {
    inner: GibbsPosterior,
}

#[pymethods]
impl PyGibbs {
    #[new]
    #[pyo3(signature = (lambda_, features=None, prior=None, cube=None))]
    fn new(
        py: Python<'_>,
        lambda_: Vec<f64>,
        features: Option<Vec<Vec<f64>>>,
        prior: Option<Vec<f64>>,
        cube: Option<&Bound<'_, PyAny>>,
    ) -> PyResult<Self> {
        let (p0, f) = model(py, features, prior, cube)?;
        Ok(PyGibbs {
            inner: GibbsPosterior::new(p0, f, lambda_).py()?,
        })
    }

    #[getter]
    fn lambda_(&self) -> Vec<f64> {
        self.inner.lambda().to_vec()
    }

    #[getter]
    fn gauge(&self) -> Option<String> {
        self.inner.gauge().map(str::to_string)
    }

    /// Same prior and features, other coefficients.
    fn with_lambda(&self, lambda_: Vec<f64>) -> PyResult<Self> {
        Ok(PyGibbs {
            inner: self.inner.with_lambda(lambda_).py()?,
        })
    }

    /// World probabilities; `None` on the cube.
    fn probs(&self) -> PyResult<Option<Vec<f64>>> {
        Ok(self.inner.measure().py()?.probs())
    }

    fn moments(&self) -> Vec<f64> {
        self.inner.moments().mu
    }

    fn covariance(&self) -> Vec<Vec<f64>> {
        self.inner.covariance()
    }

    fn log_normalizer(&self) -> f64 {
        self.inner.log_normalizer()
    }

    fn log_partition(&self, py: Python<'_>, truth_set: &Bound<'_, PyAny>) -> PyResult<f64> {
        let t = truth(py, truth_set, self.inner.prior().space())?;
        self.inner.log_partition(&t).py()
    }

    /// `P(T)`.
    fn mass(&self, py: Python<'_>, truth_set: &Bound<'_, PyAny>) -> PyResult<f64> {
        let t = truth(py, truth_set, self.inner.prior().space())?;
        self.inner.measure().py()?.measure_of(&t).py()
    }

    /// `I⁺(T) = log P(T) − log P0(T)`.
    fn active_info(&self, py: Python<'_>, truth_set: &Bound<'_, PyAny>) -> PyResult<f64> {
        let t = truth(py, truth_set, self.inner.prior().space())?;
        ka::active_info(self.inner.prior(), &self.inner.measure().py()?, &t).py()
    }

    /// Learning and knowledge verdicts against the prior.
    #[pyo3(signature = (truth_set, x0, eps_grid=None))]
    fn verdict<'py>(
        &self,
        py: Python<'py>,
        truth_set: &Bound<'_, PyAny>,
        x0: &Bound<'_, PyAny>,
        eps_grid: Option<Vec<f64>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let space = self.inner.prior().space();
        let t = truth(py, truth_set, space)?;
        let r = ka::lka_verdict(
            self.inner.prior(),
            &self.inner.measure().py()?,
            &t,
            &world(x0)?,
            space.natural_metric(),
            eps_grid.as_deref(),
        )
        .py()?;
        to_py(py, &r)
    }

    /// `m` draws, deterministic in `seed`.
    fn sample<'py>(
        &self,
        py: Python<'py>,
        m: usize,
        seed: u64,
    ) -> PyResult<Vec<Bound<'py, PyAny>>> {
        let p = self.inner.measure().py()?;
        secondary::sample_posterior(&p, m, seed)
            .iter()
            .map(|x| world_to_py(py, x))
            .collect()
    }

    fn tv_distance(&self, other: &PyGibbs) -> PyResult<f64> {
        worlds::tv_distance(&self.inner.measure().py()?, &other.inner.measure().py()?).py()
    }

    fn __repr__(&self) -> String {
        format!(
            "Gibbs(lambda_={:?}, gauge={:?})",
            self.inner.lambda(),
            self.inner.gauge()
        )
    }
}

fn solver_options(
    tolerance: Option<f64>,
    max_iterations: Option<usize>,
    lambda_cap: Option<f64>,
) -> SolverOptions {
    let mut o = SolverOptions::default();
    if let Some(t) = tolerance {
        o.gradient_tolerance = t;
    }
    if let Some(m) = max_iterations {
        o.max_iterations = m;
    }
    if let Some(c) = lambda_cap {
        o.lambda_cap = c;
    }
    o
}

/// Fit `λ` so the Gibbs moments match `target`; returns `(Gibbs, report)`.
#[pyfunction]
#[pyo3(signature = (target, features=None, prior=None, cube=None, tolerance=None, max_iterations=None, lambda_cap=None))]
#[allow(clippy::too_many_arguments)]
fn fit<'py>(
    py: Python<'py>,
    target: Vec<f64>,
    features: Option<Vec<Vec<f64>>>,
    prior: Option<Vec<f64>>,
    cube: Option<&Bound<'_, PyAny>>,
    tolerance: Option<f64>,
    max_iterations: Option<usize>,
    lambda_cap: Option<f64>,
) -> PyResult<(PyGibbs, Bound<'py, PyAny>)> {
    let (p0, f) = model(py, features, prior, cube)?;
    let opts = solver_options(tolerance, max_iterations, lambda_cap);
    let r = maxent::fit_lambda(&p0, &f, &MomentVector::new(target), &opts).py()?;
    let report = to_py(py, &r.report)?;
    Ok((PyGibbs { inner: r.posterior }, report))
}

/// Maximum-likelihood fit to a sample of worlds.
#[pyfunction]
#[pyo3(signature = (sample, features=None, prior=None, cube=None))]
fn mle<'py>(
    py: Python<'py>,
    sample: Vec<Bound<'py, PyAny>>,
    features: Option<Vec<Vec<f64>>>,
    prior: Option<Vec<f64>>,
    cube: Option<&Bound<'_, PyAny>>,
) -> PyResult<(PyGibbs, Bound<'py, PyAny>)> {
    let (p0, f) = model(py, features, prior, cube)?;
    let xs: Vec<World> = sample.iter().map(world).collect::<PyResult<_>>()?;
    let r = maxent::mle_lambda(&p0, &f, &xs, &SolverOptions::default()).py()?;
    let report = to_py(py, &r.report)?;
    Ok((PyGibbs { inner: r.posterior }, report))
}

/// `I⁺(T)` between two finite probability vectors.
#[pyfunction]
fn active_info(
    py: Python<'_>,
    prior: Vec<f64>,
    posterior: Vec<f64>,
    truth_set: &Bound<'_, PyAny>,
) -> PyResult<f64> {
    let p0 = finite(prior)?;
    let t = truth(py, truth_set, p0.space())?;
    ka::active_info(&p0, &finite(posterior)?, &t).py()
}

/// `I⁺(T; P, P̃) = log P̃(T) − log P(T)`, with its parts.
#[pyfunction]
fn bias<'py>(
    py: Python<'py>,
    p: Vec<f64>,
    p_tilde: Vec<f64>,
    truth_set: &Bound<'_, PyAny>,
) -> PyResult<Bound<'py, PyAny>> {
    let p = finite(p)?;
    let t = truth(py, truth_set, p.space())?;
    to_py(py, &ka::bias(&t, &p, &finite(p_tilde)?).py()?)
}

/// Verdicts for finite probability vectors under the discrete metric.
#[pyfunction]
#[pyo3(signature = (prior, posterior, truth_set, x0, eps_grid=None))]
fn lka_verdict<'py>(
    py: Python<'py>,
    prior: Vec<f64>,
    posterior: Vec<f64>,
    truth_set: &Bound<'_, PyAny>,
    x0: usize,
    eps_grid: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    let p0 = finite(prior)?;
    let t = truth(py, truth_set, p0.space())?;
    let r = ka::lka_verdict(
        &p0,
        &finite(posterior)?,
        &t,
        &World::Index(x0),
        Metric::Discrete,
        eps_grid.as_deref(),
    )
    .py()?;
    to_py(py, &r)
}

#[pyfunction]
fn tv_distance(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    worlds::tv_distance(&finite(p)?, &finite(q)?).py()
}

/// Binary-code feature rows that separate `d` worlds with `⌈log₂ d⌉` features.
#[pyfunction]
fn fundamental_limit_features(d: usize) -> PyResult<Vec<Vec<f64>>> {
    let f = ka::fundamental_limit_features(d).py()?;
    let n = f.n();
    Ok(f.values()
        .unwrap_or_default()
        .chunks(n)
        .map(|c| c.to_vec())
        .collect())
}

#[pyfunction]
#[pyo3(signature = (d, x0, magnitude=40.0))]
fn lambda_for_world(d: usize, x0: usize, magnitude: f64) -> PyResult<Vec<f64>> {
    ka::lambda_for_world(d, x0, magnitude).py()
}

/// Run a scenario document (`{"scenario": "poll", ..., "N": 10}`).
#[pyfunction]
#[pyo3(signature = (config, seed, cross_check=false))]
fn run_scenario<'py>(
    py: Python<'py>,
    config: &Bound<'_, PyAny>,
    seed: u64,
    cross_check: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg: ScenarioConfig = from_py(py, config, "config")?;
    cfg.kind.validate().py()?;
    let run = py
        .detach(|| scenarios::run_scenario(&cfg, seed, cross_check))
        .py()?;
    to_py(py, &run)
}

#[pyfunction]
fn primary_convergence<'py>(
    py: Python<'py>,
    fixture: &Bound<'_, PyAny>,
    ns: Vec<usize>,
    r: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let k: ScenarioKind = from_py(py, fixture, "fixture")?;
    let rep = py
        .detach(|| asymptotics::primary_convergence(&k, &ns, r, seed))
        .py()?;
    to_py(py, &rep)
}

#[pyfunction]
#[pyo3(signature = (fixture, a, n, r, seed, fd_step=None))]
fn clt_check<'py>(
    py: Python<'py>,
    fixture: &Bound<'_, PyAny>,
    a: &Bound<'_, PyAny>,
    n: usize,
    r: usize,
    seed: u64,
    fd_step: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let k: ScenarioKind = from_py(py, fixture, "fixture")?;
    let a: TruthSet = from_py(py, a, "a")?;
    let rep = py
        .detach(|| asymptotics::clt_check(&k, &a, n, r, seed, fd_step))
        .py()?;
    to_py(py, &rep)
}

#[pyfunction]
fn synthetic_loop<'py>(
    py: Python<'py>,
    fixture: &Bound<'_, PyAny>,
    generations: usize,
    n_per_gen: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let s: SyntheticScenario = from_py(py, fixture, "fixture")?;
    let rep = py
        .detach(|| asymptotics::synthetic_loop(&s, generations, n_per_gen, seed))
        .py()?;
    to_py(py, &rep)
}

/// Plug-in secondary agent fed `m` draws from `Q_λ`.
#[pyfunction]
#[pyo3(signature = (features, truth_set, lambda_, m, seed, prior=None))]
fn plugin_secondary<'py>(
    py: Python<'py>,
    features: Vec<Vec<f64>>,
    truth_set: &Bound<'_, PyAny>,
    lambda_: Vec<f64>,
    m: usize,
    seed: u64,
    prior: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    let (p0, f) = model(py, Some(features), prior, None)?;
    let t = truth(py, truth_set, p0.space())?;
    let r = secondary::plugin_secondary(&p0, &f, &t, &lambda_, m, seed).py()?;
    to_py(py, &r)
}

/// The constants of the `1/m` bias expansion.
#[pyfunction]
#[pyo3(signature = (features, truth_set, lambda_, prior=None, h=None))]
fn expansion_constant<'py>(
    py: Python<'py>,
    features: Vec<Vec<f64>>,
    truth_set: &Bound<'_, PyAny>,
    lambda_: Vec<f64>,
    prior: Option<Vec<f64>>,
    h: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let (p0, f) = model(py, Some(features), prior, None)?;
    let t = truth(py, truth_set, p0.space())?;
    let k = secondary::expansion_constant(&p0, &f, &t, &lambda_, h).py()?;
    to_py(py, &k)
}

/// Monte Carlo check of the expansion over `m_list` with `r` replicates each.
#[pyfunction]
#[pyo3(signature = (features, truth_set, lambda_, m_list, r, seed, prior=None))]
#[allow(clippy::too_many_arguments)]
fn expansion_verify<'py>(
    py: Python<'py>,
    features: Vec<Vec<f64>>,
    truth_set: &Bound<'_, PyAny>,
    lambda_: Vec<f64>,
    m_list: Vec<usize>,
    r: usize,
    seed: u64,
    prior: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    let (p0, f) = model(py, Some(features), prior, None)?;
    let t = truth(py, truth_set, p0.space())?;
    let rep = py
        .detach(|| secondary::expansion_verify(&p0, &f, &t, &lambda_, &m_list, r, seed))
        .py()?;
    to_py(py, &rep)
}

#[pymodule]
fn lka(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("ValidationError", py.get_type::<ValidationError>())?;
    m.add("NumericalError", py.get_type::<NumericalError>())?;
    m.add_class::<PyGibbs>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(mle, m)?)?;
    m.add_function(wrap_pyfunction!(active_info, m)?)?;
    m.add_function(wrap_pyfunction!(bias, m)?)?;
    m.add_function(wrap_pyfunction!(lka_verdict, m)?)?;
    m.add_function(wrap_pyfunction!(tv_distance, m)?)?;
    m.add_function(wrap_pyfunction!(fundamental_limit_features, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_for_world, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(primary_convergence, m)?)?;
    m.add_function(wrap_pyfunction!(clt_check, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_loop, m)?)?;
    m.add_function(wrap_pyfunction!(plugin_secondary, m)?)?;
    m.add_function(wrap_pyfunction!(expansion_constant, m)?)?;
    m.add_function(wrap_pyfunction!(expansion_verify, m)?)?;
    Ok(())
}
