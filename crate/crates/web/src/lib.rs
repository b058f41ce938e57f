//! wasm-bindgen bindings for the static demo in `www/`.
//!
//! Each export returns a JSON string. The `*_json` functions do the work and
//! are usable natively; the exported wrappers only map errors to `JsError`.

use altroute::asymptotics::{alpha_schedule, bdar_capacity_bound, dar_capacity_lower_bound};
use altroute::oracle::{self, ChainOptions};
use altroute::{Capacity, Engine, Error, PolicyKind, SimParams};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest expected number of arrivals a single `simulate` call may process.
pub const MAX_ARRIVALS: f64 = 2e7;
/// State-space bound for the in-browser oracle.
pub const MAX_STATES: usize = 20_000;

#[derive(Serialize)]
struct Series {
    t: Vec<f64>,
    max_load: Vec<u32>,
    p95_load: Vec<u32>,
    blocking: Vec<f64>,
    offered: u64,
    blocked: u64,
}

#[derive(Serialize)]
struct Bounds {
    n: u64,
    d: u32,
    rho: f64,
    alphas: Vec<f64>,
    i_star: usize,
    predicted_max_load: usize,
    bdar_bound: f64,
    dar_lower_bound: f64,
}

#[derive(Serialize)]
struct Exact {
    states: usize,
    blocking: f64,
    max_load_distribution: Vec<f64>,
    erlang_b_direct: Option<f64>,
}

fn to_json<T: Serialize>(v: &T) -> Result<String, Error> {
    serde_json::to_string(v).map_err(|e| Error::Config(e.to_string()))
}

/// Runs one network from empty for `horizon` time units and samples the
/// maximum alternative load once per time unit.
pub fn simulate_json(
    n: u32,
    d: u32,
    b_alt: &str,
    policy: &str,
    rho: f64,
    horizon: f64,
    seed: u64,
) -> Result<String, Error> {
    let params = SimParams {
        n,
        d,
        lambda: rho,
        mu: 1.0,
        b_alt: b_alt.parse()?,
        b_direct: Capacity::Finite(0),
        policy: policy.parse()?,
        seed,
        ..SimParams::default()
    };
    let pairs = n as f64 * (n as f64 - 1.0) / 2.0;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Config(format!("horizon = {horizon}; need a positive time")));
    }
    if pairs * rho * horizon > MAX_ARRIVALS {
        return Err(Error::Config(format!(
            "about {:.1e} arrivals requested; the demo allows {MAX_ARRIVALS:.0e}",
            pairs * rho * horizon
        )));
    }
    let mut engine = Engine::new(&params)?;
    let report = engine.run_until(horizon, Some(1.0));
    let s = &report.samples;
    to_json(&Series {
        t: s.iter().map(|x| x.t).collect(),
        max_load: s.iter().map(|x| x.max_load).collect(),
        p95_load: s.iter().map(|x| x.p95_load).collect(),
        blocking: s.iter().map(|x| x.blocking_rate().unwrap_or(0.0)).collect(),
        offered: report.counters.offered,
        blocked: report.counters.blocked,
    })
}

pub fn bounds_json(n: f64, d: u32, rho: f64) -> Result<String, Error> {
    if !(n.is_finite() && n >= 3.0 && n <= u64::MAX as f64) {
        return Err(Error::OutOfDomain(format!("n = {n}")));
    }
    let n = n as u64;
    let s = alpha_schedule(n, d, rho)?;
    to_json(&Bounds {
        n,
        d,
        rho,
        i_star: s.i_star,
        predicted_max_load: s.predicted_max_load,
        alphas: s.alphas,
        bdar_bound: bdar_capacity_bound(n, d as f64)?,
        dar_lower_bound: dar_capacity_lower_bound(n, d as f64)?,
    })
}

pub fn exact_json(n: u32, d: u32, b_alt: u32, b_direct: u32, policy: &str, rho: f64) -> Result<String, Error> {
    let params = SimParams {
        n,
        d,
        lambda: rho,
        mu: 1.0,
        b_alt: Capacity::Finite(b_alt),
        b_direct: Capacity::Finite(b_direct),
        policy: policy.parse::<PolicyKind>()?,
        ..SimParams::default()
    };
    let chain = oracle::build_chain(&params, ChainOptions { max_states: MAX_STATES, truncate_unbounded: None })?;
    let dist = oracle::stationary_dist(&chain, oracle::DEFAULT_TOL)?;
    to_json(&Exact {
        states: chain.len(),
        blocking: oracle::exact_blocking(&chain, &dist),
        max_load_distribution: oracle::max_load_distribution(&chain, &dist),
        erlang_b_direct: (b_direct > 0).then(|| oracle::erlang_b(b_direct, rho)),
    })
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn simulate(n: u32, d: u32, b_alt: &str, policy: &str, rho: f64, horizon: f64, seed: u64) -> Result<String, JsError> {
    simulate_json(n, d, b_alt, policy, rho, horizon, seed).map_err(js)
}

#[wasm_bindgen]
pub fn bounds(n: f64, d: u32, rho: f64) -> Result<String, JsError> {
    bounds_json(n, d, rho).map_err(js)
}

#[wasm_bindgen]
pub fn exact(n: u32, d: u32, b_alt: u32, b_direct: u32, policy: &str, rho: f64) -> Result<String, JsError> {
    exact_json(n, d, b_alt, b_direct, policy, rho).map_err(js)
}
