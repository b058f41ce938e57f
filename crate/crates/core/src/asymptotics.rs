//! Closed-form predictors: the doubly exponential α schedule, leading-term
//! capacity bounds, and an exact check of the Lyapunov generator.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{lyapunov_v, NetworkState, SimParams};

/// Predicted decay of the number of high-load edges per node.
///
/// `alphas[0]` is the start value `(n-1) rho / kappa`; index `i` in `alphas`
/// is `i` steps after it. `alphas[i_star]` is `25 ln n` and the last entry
/// is `10`. `q[i - 1]` is `(4 alphas[i-1] / (n-1))^d` for `i = 1..=i_star + 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaSchedule {
    pub n: u64,
    pub d: u32,
    pub rho: f64,
    pub kappa: f64,
    pub alphas: Vec<f64>,
    pub q: Vec<f64>,
    pub i_star: usize,
    pub predicted_max_load: usize,
    pub predicted_window: f64,
}

fn check_schedule_domain(n: u64, d: u32, rho: f64) -> Result<()> {
    if n < 3 {
        return Err(Error::OutOfDomain(format!("n = {n}; need n >= 3")));
    }
    if d < 2 {
        return Err(Error::OutOfDomain(format!("d = {d}; the schedule needs d >= 2")));
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::OutOfDomain(format!("rho = {rho}; need rho > 0")));
    }
    Ok(())
}

/// `2 rho 4^d`, the constant multiplying each step of the recurrence.
fn growth(d: u32, rho: f64) -> f64 {
    2.0 * rho * 4f64.powi(d as i32)
}

pub fn alpha_schedule(n: u64, d: u32, rho: f64) -> Result<AlphaSchedule> {
    check_schedule_domain(n, d, rho)?;
    let nf = n as f64;
    let df = d as f64;
    let c = growth(d, rho);
    let kappa = std::f64::consts::E * c.powf(1.0 / (df - 1.0));
    let threshold = (nf.powf(df - 1.0) * nf.ln() / rho).powf(1.0 / df);
    let scale = (nf - 1.0).powf(df - 1.0);

    let mut alphas = vec![(nf - 1.0) * rho / kappa];
    loop {
        let prev = *alphas.last().expect("nonempty");
        if prev < threshold {
            break;
        }
        alphas.push(c * prev.powi(d as i32) / scale);
    }
    let i_star = alphas.len();
    alphas.push(25.0 * nf.ln());
    alphas.push(10.0);

    let q = alphas[..=i_star].iter().map(|a| (4.0 * a / (nf - 1.0)).powi(d as i32)).collect();
    Ok(AlphaSchedule {
        n,
        d,
        rho,
        kappa,
        alphas,
        q,
        i_star,
        predicted_max_load: i_star + 3,
        predicted_window: nf * (i_star as f64 + 2.0),
    })
}

/// Closed-form solution of the recurrence, `i` steps after the start value:
/// `(2 rho 4^d)^(-1/(d-1)) (n-1) (rho/e)^(d^i)`.
pub fn alpha_closed_form(n: u64, d: u32, rho: f64, i: u32) -> Result<f64> {
    check_schedule_domain(n, d, rho)?;
    let df = d as f64;
    let c = growth(d, rho);
    let log = -c.ln() / (df - 1.0) + ((n - 1) as f64).ln() + df.powi(i as i32) * (rho.ln() - 1.0);
    Ok(log.exp())
}

fn check_bound_domain(n: u64, d: f64, min_d: f64) -> Result<()> {
    if n < 16 {
        return Err(Error::OutOfDomain(format!("n = {n}; need n >= 16")));
    }
    if !(d.is_finite() && d >= min_d) {
        return Err(Error::OutOfDomain(format!("d = {d}; need d >= {min_d}")));
    }
    Ok(())
}

/// Leading term `ln ln n / ln d` of the capacity that suffices for the
/// best-of-d policies.
pub fn bdar_capacity_bound(n: u64, d: f64) -> Result<f64> {
    check_bound_domain(n, d, 2.0)?;
    Ok((n as f64).ln().ln() / d.ln())
}

/// Leading term `sqrt(ln n / (d ln ln n))` of the capacity that first-fit
/// probing needs.
pub fn dar_capacity_lower_bound(n: u64, d: f64) -> Result<f64> {
    check_bound_domain(n, d, 1.0)?;
    let ln = (n as f64).ln();
    Ok((ln / (d * ln.ln())).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub v: u64,
    /// Generator applied to V, summed transition by transition.
    pub generator: BigRational,
    /// `lambda N - mu V + mu`.
    pub closed_form: BigRational,
    pub threshold: BigRational,
    /// `-(mu/2) V + (lambda N + mu) 1[V < threshold]`.
    pub bound: BigRational,
    pub identity_holds: bool,
    pub inequality_holds: bool,
}

fn rational(x: f64, what: &str) -> Result<BigRational> {
    BigRational::from_f64(x).ok_or_else(|| Error::OutOfDomain(format!("{what} = {x} is not finite")))
}

/// Default threshold of the finite set in the drift condition, `2 (lambda N + mu) / mu`.
pub fn default_drift_threshold(params: &SimParams) -> f64 {
    let n_pairs = params.num_pairs() as f64;
    2.0 * (params.lambda * n_pairs + params.mu) / params.mu
}

/// Applies the generator of the unbounded-capacity chain to V at `state`.
/// Rates are converted to rationals exactly, so the result carries no
/// rounding. Every arrival is accepted and adds one to V; every call
/// departs at rate mu and removes one.
pub fn drift_check(state: &NetworkState, params: &SimParams, threshold: Option<f64>) -> Result<DriftReport> {
    let lambda = rational(params.lambda, "lambda")?;
    let mu = rational(params.mu, "mu")?;
    let threshold = rational(threshold.unwrap_or_else(|| default_drift_threshold(params)), "threshold")?;
    let n_pairs = BigRational::from_integer(BigInt::from(params.num_pairs()));
    let v = lyapunov_v(state);
    let v_q = BigRational::from_integer(BigInt::from(v));

    let mut generator = BigRational::zero();
    for _ in 0..params.num_pairs() {
        generator += &lambda;
    }
    for _ in state.calls() {
        generator -= &mu;
    }

    let closed_form = &lambda * &n_pairs - &mu * &v_q + &mu;
    let two = BigRational::from_integer(BigInt::from(2));
    let mut bound = -(&mu / &two) * &v_q;
    if v_q < threshold {
        bound += &lambda * &n_pairs + &mu;
    }
    Ok(DriftReport {
        v,
        identity_holds: generator == closed_form,
        inequality_holds: !(&generator - &bound).is_positive(),
        generator,
        closed_form,
        threshold,
        bound,
    })
}
