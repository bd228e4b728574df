//! Python bindings: parse, validate, transform, solve, replay, and
//! cross-check games from Python. Rationals cross the boundary as exact
//! `"p/q"` strings.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rptg_core::model;
use rptg_core::pipeline;
use rptg_core::rational::Q;
use rptg_core::semantics;

fn parse_q(s: &str) -> PyResult<Q> {
    s.parse().map_err(|e| PyValueError::new_err(format!("{e}")))
}

/// A parsed game; the handle every other call takes.
#[pyclass]
struct Game {
    inner: model::Game,
}

#[pymethods]
impl Game {
    #[getter]
    fn stage(&self) -> String {
        self.inner.stage.to_string()
    }

    #[getter]
    fn delta(&self) -> String {
        self.inner.delta.to_string()
    }

    #[getter]
    fn clock_bound(&self) -> u32 {
        self.inner.clock_bound
    }

    #[getter]
    fn locations(&self) -> Vec<String> {
        self.inner.locations.iter().map(|l| l.id.clone()).collect()
    }

    fn serialize(&self) -> String {
        model::serialize_game(&self.inner)
    }

    /// Class diagnostics as a JSON string; empty list means valid.
    fn validate(&self) -> PyResult<String> {
        let diags = model::validate_game(&self.inner);
        serde_json::to_string(&diags).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
}

/// Solved value functions and strategy in the input game's coordinates.
#[pyclass]
struct SolveResult {
    optcost: std::collections::BTreeMap<String, rptg_core::pwa::Pwa>,
    strategy_json: String,
    stats_json: String,
}

#[pymethods]
impl SolveResult {
    #[getter]
    fn locations(&self) -> Vec<String> {
        self.optcost.keys().cloned().collect()
    }

    /// Breakpoints of a location's value function as `(x, value)` strings.
    fn breakpoints(&self, location: &str) -> PyResult<Vec<(String, String)>> {
        let f = self
            .optcost
            .get(location)
            .ok_or_else(|| PyValueError::new_err(format!("unknown location {location}")))?;
        Ok(f.breakpoints().iter().map(|(x, v)| (x.to_string(), v.to_string())).collect())
    }

    /// Exact value at a rational clock valuation.
    fn value_at(&self, location: &str, x: &str) -> PyResult<String> {
        let f = self
            .optcost
            .get(location)
            .ok_or_else(|| PyValueError::new_err(format!("unknown location {location}")))?;
        let x = parse_q(x)?;
        f.evaluate(&x)
            .map(|v| v.to_string())
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn strategy_json(&self) -> String {
        self.strategy_json.clone()
    }

    fn stats_json(&self) -> String {
        self.stats_json.clone()
    }
}

/// Parses a game from its JSON encoding.
#[pyfunction]
fn parse_game(text: &str) -> PyResult<Game> {
    model::parse_game(text.as_bytes())
        .map(|inner| Game { inner })
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Runs the full pipeline and pulls the results back to the input stage.
#[pyfunction]
#[pyo3(signature = (game, epsilon="1/10"))]
fn solve(game: &Game, epsilon: &str) -> PyResult<SolveResult> {
    let eps = parse_q(epsilon)?;
    let r = pipeline::solve_pipeline(&game.inner, &eps)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(SolveResult {
        optcost: r.optcost,
        strategy_json: serde_json::to_string(&r.strategy)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?,
        stats_json: serde_json::to_string(&r.solve.stats)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?,
    })
}

/// Replays a play (JSON) and returns `(reached_target, total_cost)`.
#[pyfunction]
fn replay(game: &Game, play_json: &str) -> PyResult<(bool, String)> {
    let play: semantics::PlaySpec =
        serde_json::from_str(play_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let out = semantics::replay(&game.inner, &play)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((out.reached_target, out.total.to_string()))
}

/// Grid value iteration; returns `{location: [value, ...]}` over `{i/k}`.
#[pyfunction]
fn oracle(game: &Game, k: u32) -> PyResult<std::collections::BTreeMap<String, Vec<String>>> {
    let res = semantics::oracle_optcost(&game.inner, k)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(res
        .values
        .iter()
        .map(|(loc, row)| (loc.clone(), row.iter().map(|v| v.to_string()).collect()))
        .collect())
}

/// Deterministic random games inside the solvable class, as JSON strings.
#[pyfunction]
#[pyo3(signature = (seed, count, locations=4, price_min=-3, price_max=3, guard_bound=2, delta="1/8"))]
fn fixtures(
    seed: u64,
    count: usize,
    locations: usize,
    price_min: i64,
    price_max: i64,
    guard_bound: i64,
    delta: &str,
) -> PyResult<Vec<String>> {
    let params = rptg_core::fixtures::FixtureParams {
        locations,
        price_min,
        price_max,
        guard_bound,
        delta: parse_q(delta)?,
    };
    let batch = rptg_core::fixtures::generate(seed, count, &params);
    Ok(batch.games.iter().map(model::serialize_game).collect())
}

#[pymodule]
fn rptg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Game>()?;
    m.add_class::<SolveResult>()?;
    m.add_function(wrap_pyfunction!(parse_game, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(fixtures, m)?)?;
    Ok(())
}
