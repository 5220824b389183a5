//! Python bindings for the caching Stackelberg game.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ::stackcache::follower::{self, FollowerError};
use ::stackcache::oracle::{self, Deviation};
use ::stackcache::stackelberg::{self, SolveOptions, StackelbergError};
use ::stackcache::{leader, BrOptions, BrSchedule, CpParams, LeaderError, Market, MarketConfig, QuantityProfile};

fn follower_err(e: FollowerError) -> PyErr {
    match e {
        FollowerError::NonConvergence(_) => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn leader_err(e: LeaderError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A validated market: SBS capacities plus content providers given as
/// `(alpha, p_mean, delta_p, catalog_size)` tuples.
#[pyclass(name = "Market", frozen)]
struct PyMarket {
    inner: Market,
}

#[pymethods]
impl PyMarket {
    #[new]
    fn new(capacities: Vec<f64>, cps: Vec<(f64, f64, f64, u64)>) -> PyResult<Self> {
        let cps = cps.into_iter().map(|(a, p, dp, f)| CpParams::new(a, p, dp, f)).collect();
        Self::from_config(MarketConfig::new(capacities, cps))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let config = MarketConfig::from_json(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Self::from_config(config)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn capacity(&self) -> f64 {
        self.inner.capacity()
    }

    #[getter]
    fn num_cps(&self) -> usize {
        self.inner.num_cps()
    }

    #[getter]
    fn alphas(&self) -> Vec<f64> {
        self.inner.alphas()
    }

    fn __repr__(&self) -> String {
        format!("Market(S={}, alphas={:?})", self.inner.capacity(), self.inner.alphas())
    }
}

impl PyMarket {
    fn from_config(config: MarketConfig) -> PyResult<Self> {
        Market::new(config).map(|inner| Self { inner }).map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

#[pyfunction]
fn cp_utility(price: f64, q_m: f64, others: f64, alpha: f64) -> PyResult<f64> {
    follower::cp_utility(price, q_m, others, alpha).map_err(follower_err)
}

#[pyfunction]
fn best_response(price: f64, others: f64, alpha: f64) -> PyResult<f64> {
    follower::best_response(price, others, alpha).map_err(follower_err)
}

#[pyfunction]
fn solve_ne_linear(market: &PyMarket, price: f64) -> PyResult<Vec<f64>> {
    Ok(follower::solve_ne_linear(&market.inner, price).map_err(follower_err)?.profile.q)
}

#[pyfunction]
fn ne_closed_form(market: &PyMarket, price: f64) -> PyResult<Vec<f64>> {
    Ok(follower::ne_closed_form(&market.inner, price).map_err(follower_err)?.q)
}

#[pyfunction]
fn round_uncoded(q: Vec<f64>) -> Vec<i64> {
    follower::round_uncoded(&QuantityProfile::new(q)).rounded.unwrap_or_default()
}

/// Returns `(profiles, converged, final_residual)`. Raises `RuntimeError` when
/// `max_iter` rounds are exhausted.
#[pyfunction]
#[pyo3(signature = (market, price, init=None, tol=1e-9, max_iter=10_000, sequential=false))]
fn br_dynamics(
    market: &PyMarket,
    price: f64,
    init: Option<Vec<f64>>,
    tol: f64,
    max_iter: usize,
    sequential: bool,
) -> PyResult<(Vec<Vec<f64>>, bool, f64)> {
    let initial = QuantityProfile::new(init.unwrap_or_else(|| vec![0.0; market.inner.num_cps()]));
    let schedule = if sequential { BrSchedule::Sequential } else { BrSchedule::Simultaneous };
    let trace = follower::br_dynamics(&market.inner, price, &initial, &BrOptions { tol, max_iter, schedule })
        .map_err(follower_err)?;
    let profiles = trace.iterations.into_iter().map(|p| p.q).collect();
    Ok((profiles, trace.converged, trace.final_residual))
}

#[pyfunction]
fn rt_coefficients(market: &PyMarket) -> PyResult<(f64, f64)> {
    let rt = leader::rt_coefficients(&market.inner).map_err(leader_err)?;
    Ok((rt.r, rt.t))
}

#[pyfunction]
fn mno_utility(market: &PyMarket, price: f64) -> PyResult<f64> {
    leader::mno_utility(price, &market.inner).map_err(leader_err)
}

/// Returns `(price, lower, upper)`.
#[pyfunction]
fn optimal_price(market: &PyMarket) -> PyResult<(f64, f64, f64)> {
    let d = leader::optimal_price(&market.inner).map_err(leader_err)?;
    Ok((d.price, d.feasible_range.0, d.feasible_range.1))
}

/// Unilateral-deviation check with absolute deviations. Returns `(passed, worst_gain)`.
#[pyfunction]
fn verify_ne(market: &PyMarket, price: f64, q: Vec<f64>, deviations: Vec<f64>) -> (bool, f64) {
    let devs: Vec<Deviation> = deviations.into_iter().map(Deviation::Absolute).collect();
    let verdict = oracle::verify_ne(&market.inner, price, &QuantityProfile::new(q), &devs);
    (verdict.passed, verdict.worst_violation)
}

/// Full equilibrium report as a dict.
#[pyfunction]
#[pyo3(signature = (market, run_br=true))]
fn solve_stackelberg<'py>(py: Python<'py>, market: &PyMarket, run_br: bool) -> PyResult<Bound<'py, PyAny>> {
    let options = SolveOptions { run_br, ..Default::default() };
    let report = stackelberg::solve_market(&market.inner, &options).map_err(|e| match e {
        StackelbergError::Follower(f) => follower_err(f),
        other => PyValueError::new_err(other.to_string()),
    })?;
    py.import("json")?.call_method1("loads", (report.to_json(),))
}

#[pymodule(name = "stackcache")]
fn stackcache_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMarket>()?;
    m.add_function(wrap_pyfunction!(cp_utility, m)?)?;
    m.add_function(wrap_pyfunction!(best_response, m)?)?;
    m.add_function(wrap_pyfunction!(solve_ne_linear, m)?)?;
    m.add_function(wrap_pyfunction!(ne_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(round_uncoded, m)?)?;
    m.add_function(wrap_pyfunction!(br_dynamics, m)?)?;
    m.add_function(wrap_pyfunction!(rt_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(mno_utility, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_price, m)?)?;
    m.add_function(wrap_pyfunction!(verify_ne, m)?)?;
    m.add_function(wrap_pyfunction!(solve_stackelberg, m)?)?;
    Ok(())
}
