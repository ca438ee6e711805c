//! Python bindings for `rtt_core`. Core errors surface as `ValueError`.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rtt_core::decomposition::{
    sample_descents_decomposed, sample_fixed_points_decomposed, sample_inversions_decomposed,
    Channel,
};
use rtt_core::exact;
use rtt_core::harness::{self, GofKind, Sampler, Statistic};
use rtt_core::limits;
use rtt_core::occupancy;
use rtt_core::rng::stream;
use rtt_core::shuffle;

fn err(e: rtt_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn tag<T: std::str::FromStr<Err = rtt_core::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

/// A deck in one-line notation: `entries[i]` is the card at position `i + 1`.
#[pyclass(name = "Permutation", module = "rtt_shuffle", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyPermutation(rtt_core::Permutation);

#[pymethods]
impl PyPermutation {
    #[new]
    fn new(entries: Vec<u32>) -> PyResult<Self> {
        rtt_core::Permutation::from_entries(entries).map(Self).map_err(err)
    }

    #[staticmethod]
    fn identity(n: usize) -> PyResult<Self> {
        rtt_core::Permutation::identity(n).map(Self).map_err(err)
    }

    #[staticmethod]
    fn sample_uniform(n: usize, seed: u64) -> PyResult<Self> {
        rtt_core::Permutation::sample_uniform(n, &mut stream(seed)).map(Self).map_err(err)
    }

    #[getter]
    fn entries(&self) -> Vec<u32> {
        self.0.entries().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Permutation({})", self.0)
    }

    fn fixed_points(&self) -> usize {
        self.0.count_fixed_points()
    }

    fn descents(&self) -> usize {
        self.0.count_descents()
    }

    fn inversions(&self) -> u64 {
        self.0.count_inversions()
    }

    fn is_identity(&self) -> bool {
        self.0.is_identity()
    }

    fn invert(&self) -> Self {
        Self(self.0.invert())
    }

    /// `self ∘ other`.
    fn compose(&self, other: &PyPermutation) -> PyResult<Self> {
        self.0.compose(&other.0).map(Self).map_err(err)
    }

    fn prefix_summary<'py>(&self, py: Python<'py>, length: usize) -> PyResult<Bound<'py, PyDict>> {
        let s = self.0.prefix_summary(length).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("len", s.len)?;
        d.set_item("prefix_max", s.prefix_max)?;
        d.set_item("prefix_fixed", s.prefix_fixed)?;
        d.set_item("prefix_descents", s.prefix_descents)?;
        d.set_item("prefix_inversions", s.prefix_inversions)?;
        Ok(d)
    }
}

/// Deck after moving each picked card to the top in turn, and the number of
/// distinct cards picked.
#[pyfunction]
fn apply_random_to_top(n: usize, picks: Vec<u32>) -> PyResult<(PyPermutation, usize)> {
    let s = shuffle::SelectionSequence::new(n, picks).map_err(err)?;
    let out = shuffle::apply_fast(&s);
    Ok((PyPermutation(out.deck), out.distinct_selected))
}

#[pyfunction]
fn sample_random_to_top(n: usize, r: usize, seed: u64) -> PyResult<PyPermutation> {
    shuffle::sample_random_to_top(n, r, &mut stream(seed))
        .map(|o| PyPermutation(o.deck))
        .map_err(err)
}

#[pyfunction]
fn sample_top_to_random(n: usize, r: usize, seed: u64) -> PyResult<PyPermutation> {
    shuffle::sample_top_to_random(n, r, &mut stream(seed))
        .map(PyPermutation)
        .map_err(err)
}

/// One decomposition draw `(k, value)` of `statistic` after `r` shuffles.
#[pyfunction]
fn sample_decomposed(statistic: &str, n: usize, r: usize, seed: u64) -> PyResult<(usize, u64)> {
    let rng = &mut stream(seed);
    let d = match tag::<Statistic>(statistic)? {
        Statistic::FixedPoints => sample_fixed_points_decomposed(n, r, rng),
        Statistic::Descents => sample_descents_decomposed(n, r, Channel::FormulaDirect, rng),
        Statistic::Inversions => sample_inversions_decomposed(n, r, rng),
    }
    .map_err(err)?;
    Ok((d.k, d.statistic_value))
}

#[pyfunction]
fn occupied_moments(n: usize, r: usize) -> PyResult<(f64, f64)> {
    occupancy::occupied_moments(n, r).map_err(err)
}

#[pyfunction]
fn occupied_pmf(n: usize, r: usize) -> PyResult<Vec<f64>> {
    occupancy::occupied_pmf(n, r).map_err(err)
}

#[pyfunction]
fn occupied_clt_params(c: f64) -> PyResult<(f64, f64)> {
    occupancy::occupied_clt_params(c).map_err(err)
}

#[pyfunction]
fn expected_fixed_points(n: usize, r: usize) -> PyResult<f64> {
    exact::expected_fixed_points(n, r).map_err(err)
}

#[pyfunction]
fn expected_inversions(n: usize, r: usize) -> f64 {
    exact::expected_inversions(n, r)
}

/// Exact `(mean, variance)` of the number of descents.
#[pyfunction]
fn descents_moments(n: usize, r: usize) -> PyResult<(f64, f64)> {
    exact::descents_moments(n, r).map_err(err)
}

#[pyfunction]
fn return_probability(n: usize, r: usize, k: usize) -> PyResult<f64> {
    exact::return_probability(n, r, k).map_err(err)
}

#[pyfunction]
fn q_fixed_points(k: usize, m: usize, s: usize) -> PyResult<f64> {
    exact::q_fixed_points(k, m, s).map_err(err)
}

#[pyfunction]
fn prefix_max_pmf(n: usize, j: usize, m: usize) -> PyResult<f64> {
    exact::prefix_max_pmf(n, j, m).map_err(err)
}

#[pyfunction]
fn fixed_point_law_finite(n: usize, a: f64) -> PyResult<Vec<f64>> {
    exact::fixed_point_law_finite(n, a).map_err(err)
}

#[pyfunction]
fn poisson_geometric_pmf(c: f64, l: usize) -> PyResult<f64> {
    limits::poisson_geometric_pmf(c, l).map_err(err)
}

#[pyfunction]
fn descents_limit_params(c: f64) -> PyResult<(f64, f64)> {
    limits::descents_limit_params(c).map_err(err)
}

#[pyfunction]
fn inversions_limit_params(c: f64) -> PyResult<(f64, f64)> {
    limits::inversions_limit_params(c).map_err(err)
}

#[pyfunction]
fn general_clt_variance(a: f64, tau2: f64) -> PyResult<(f64, f64)> {
    limits::general_clt_variance(a, tau2).map_err(err)
}

/// A limit law to test samples against.
#[pyclass(name = "LimitLaw", module = "rtt_shuffle", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyLimitLaw(limits::LimitLaw);

#[pymethods]
impl PyLimitLaw {
    #[staticmethod]
    fn poisson_geometric(c: f64) -> PyResult<Self> {
        limits::LimitLaw::poisson_geometric(c).map(Self).map_err(err)
    }

    #[staticmethod]
    fn poisson(rate: f64) -> PyResult<Self> {
        limits::LimitLaw::poisson(rate).map(Self).map_err(err)
    }

    #[staticmethod]
    fn normal(mean: f64, variance: f64) -> PyResult<Self> {
        limits::LimitLaw::normal(mean, variance).map(Self).map_err(err)
    }

    #[staticmethod]
    fn discrete(pmf: Vec<f64>) -> PyResult<Self> {
        limits::LimitLaw::discrete(pmf).map(Self).map_err(err)
    }

    fn pmf(&self, value: i64) -> f64 {
        self.0.pmf(value)
    }

    fn cdf(&self, x: f64) -> f64 {
        self.0.cdf(x)
    }

    fn __repr__(&self) -> String {
        format!("LimitLaw({})", self.0.name())
    }
}

/// Samples from a run, in trial order.
#[pyclass(name = "EmpiricalDistribution", module = "rtt_shuffle", frozen)]
struct PyEmpirical(harness::EmpiricalDistribution);

fn report_dict<'py>(py: Python<'py>, r: &harness::TestReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("name", &r.name)?;
    d.set_item("target", &r.target)?;
    d.set_item("stat", r.stat)?;
    d.set_item("p_value", r.p_value)?;
    d.set_item("threshold", r.threshold())?;
    d.set_item("pass", r.pass)?;
    Ok(d)
}

#[pymethods]
impl PyEmpirical {
    #[staticmethod]
    #[pyo3(signature = (values, seed=None))]
    fn from_integers(values: Vec<u64>, seed: Option<u64>) -> PyResult<Self> {
        harness::EmpiricalDistribution::from_integers(&values, seed).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (values, seed=None))]
    fn from_reals(values: Vec<f64>, seed: Option<u64>) -> PyResult<Self> {
        harness::EmpiricalDistribution::from_reals(values, seed).map(Self).map_err(err)
    }

    #[getter]
    fn samples(&self) -> Vec<f64> {
        self.0.samples().to_vec()
    }

    #[getter]
    fn mean(&self) -> f64 {
        self.0.mean()
    }

    #[getter]
    fn variance(&self) -> f64 {
        self.0.variance()
    }

    #[getter]
    fn seed(&self) -> Option<u64> {
        self.0.seed
    }

    fn __len__(&self) -> usize {
        self.0.sample_count()
    }

    /// Value multiplicities, or `None` for real-valued samples.
    fn counts(&self) -> Option<BTreeMap<u64, u64>> {
        self.0.counts().cloned()
    }

    fn standardize(&self, center: f64, scale: f64) -> PyResult<Self> {
        self.0.standardize(center, scale).map(Self).map_err(err)
    }

    /// Goodness of fit (`kind` in chi2, ks, tv). `threshold` switches the
    /// pass rule to "statistic below threshold".
    #[pyo3(signature = (law, kind, threshold=None))]
    fn gof<'py>(&self, py: Python<'py>, law: &PyLimitLaw, kind: &str, threshold: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
        let kind = tag::<GofKind>(kind)?;
        let r = match threshold {
            Some(t) => harness::gof_test_with(&self.0, &law.0, kind, harness::Criterion::StatisticBelow(t)),
            None => harness::gof_test(&self.0, &law.0, kind),
        }
        .map_err(err)?;
        report_dict(py, &r)
    }

    /// Two-sample test (`kind` in chi2, ks) with pass rule p > 0.001.
    fn two_sample<'py>(&self, py: Python<'py>, other: &PyEmpirical, kind: &str) -> PyResult<Bound<'py, PyDict>> {
        let r = harness::two_sample_test(&self.0, &other.0, tag::<GofKind>(kind)?).map_err(err)?;
        report_dict(py, &r)
    }

    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = harness::summarize(&self.0).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("sample_count", s.sample_count)?;
        d.set_item("mean", s.mean)?;
        d.set_item("variance", s.variance)?;
        d.set_item("se_mean", s.se_mean)?;
        d.set_item("se_variance", s.se_variance)?;
        d.set_item("mean_ci", s.mean_ci)?;
        d.set_item("variance_ci", s.variance_ci)?;
        Ok(d)
    }
}

/// Seeded run of `trials` draws; identical for any `workers`.
#[pyfunction]
#[pyo3(signature = (n, r, trials, statistic="fixed-points", sampler="shuffle-engine", seed=1, workers=None))]
#[allow(clippy::too_many_arguments)]
fn run_experiment(
    py: Python<'_>,
    n: usize,
    r: usize,
    trials: usize,
    statistic: &str,
    sampler: &str,
    seed: u64,
    workers: Option<usize>,
) -> PyResult<PyEmpirical> {
    let statistic = tag::<Statistic>(statistic)?;
    let sampler = tag::<Sampler>(sampler)?;
    py.detach(|| harness::run_experiment(n, r, trials, statistic, sampler, seed, workers))
        .map(PyEmpirical)
        .map_err(err)
}

#[pymodule]
fn rtt_shuffle(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPermutation>()?;
    m.add_class::<PyLimitLaw>()?;
    m.add_class::<PyEmpirical>()?;
    m.add_function(wrap_pyfunction!(apply_random_to_top, m)?)?;
    m.add_function(wrap_pyfunction!(sample_random_to_top, m)?)?;
    m.add_function(wrap_pyfunction!(sample_top_to_random, m)?)?;
    m.add_function(wrap_pyfunction!(sample_decomposed, m)?)?;
    m.add_function(wrap_pyfunction!(occupied_moments, m)?)?;
    m.add_function(wrap_pyfunction!(occupied_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(occupied_clt_params, m)?)?;
    m.add_function(wrap_pyfunction!(expected_fixed_points, m)?)?;
    m.add_function(wrap_pyfunction!(expected_inversions, m)?)?;
    m.add_function(wrap_pyfunction!(descents_moments, m)?)?;
    m.add_function(wrap_pyfunction!(return_probability, m)?)?;
    m.add_function(wrap_pyfunction!(q_fixed_points, m)?)?;
    m.add_function(wrap_pyfunction!(prefix_max_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_point_law_finite, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_geometric_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(descents_limit_params, m)?)?;
    m.add_function(wrap_pyfunction!(inversions_limit_params, m)?)?;
    m.add_function(wrap_pyfunction!(general_clt_variance, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
