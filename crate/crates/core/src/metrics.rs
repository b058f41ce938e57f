//! Load statistics and estimators: maximum edge load, per-node load and
//! height tallies, blocking ratios and batch-means confidence intervals.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::engine::Counters;
use crate::error::{Error, Result};
use crate::model::{NetworkState, Pair, Route};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSnapshot {
    pub t: f64,
    pub max_alt_load: u32,
    pub load_histogram: Vec<u64>,
    /// `per_node_l[v][i-1]` = L_{>=i}^v for i = 1..=max load.
    pub per_node_l: Option<Vec<Vec<u64>>>,
    /// `per_node_m[v][i-1]` = M_{>=i}^v for i = 1..=max height.
    pub per_node_m: Option<Vec<Vec<u64>>>,
    pub blocking: Counters,
}

impl MetricsSnapshot {
    pub fn capture(t: f64, state: &NetworkState, counters: &Counters, per_node: bool) -> Self {
        let (l, m) = if per_node {
            let (l, m) = per_node_tallies(state);
            (Some(l), Some(m))
        } else {
            (None, None)
        };
        MetricsSnapshot {
            t,
            max_alt_load: max_edge_load(state),
            load_histogram: state.alt_histogram().to_vec(),
            per_node_l: l,
            per_node_m: m,
            blocking: *counters,
        }
    }
}

/// Largest alternative-channel load over all edges.
pub fn max_edge_load(state: &NetworkState) -> u32 {
    state.max_alt_load()
}

/// Smallest load `l` such that at least a fraction `q` of edges carry `<= l`.
pub fn percentile_from_histogram(hist: &[u64], q: f64) -> u32 {
    let total: u64 = hist.iter().sum();
    let target = (q * total as f64).ceil() as u64;
    let mut acc = 0;
    for (l, &c) in hist.iter().enumerate() {
        acc += c;
        if acc >= target.max(1) {
            return l as u32;
        }
    }
    hist.len().saturating_sub(1) as u32
}

/// Number of edges incident to `v` whose alternative load is at least `i`.
pub fn l_ge(state: &NetworkState, v: u32, i: u32) -> u64 {
    let n = state.n();
    (0..n)
        .filter(|&w| w != v)
        .filter(|&w| state.alt_load(Pair { u: v.min(w), v: v.max(w) }.edge(n)) >= i)
        .count() as u64
}

/// Number of (call, edge) incidences at edges touching `v` whose admission
/// height is at least `i`.
pub fn m_ge(state: &NetworkState, v: u32, i: u32) -> u64 {
    let n = state.n();
    let mut count = 0;
    for call in state.calls() {
        if let Route::Alternative { first, second, .. } = call.route {
            for (e, &h) in [first, second].iter().zip(call.heights()) {
                let p = Pair::from_edge(*e, n);
                if (p.u == v || p.v == v) && h >= i {
                    count += 1;
                }
            }
        }
    }
    count
}

/// All L_{>=i}^v and M_{>=i}^v in one pass over edges and calls.
pub fn per_node_tallies(state: &NetworkState) -> (Vec<Vec<u64>>, Vec<Vec<u64>>) {
    let n = state.n();
    let max_l = state.max_alt_load() as usize;
    let mut l_exact = vec![vec![0u64; max_l + 1]; n as usize];
    for (k, &load) in state.alt_loads().iter().enumerate() {
        let p = Pair::from_edge(crate::model::EdgeId(k as u32), n);
        l_exact[p.u as usize][load as usize] += 1;
        l_exact[p.v as usize][load as usize] += 1;
    }
    let max_h = state
        .calls()
        .flat_map(|c| match c.route {
            Route::Alternative { .. } => c.heights().to_vec(),
            Route::Direct { .. } => Vec::new(),
        })
        .max()
        .unwrap_or(0) as usize;
    let mut m_exact = vec![vec![0u64; max_h + 1]; n as usize];
    for call in state.calls() {
        if let Route::Alternative { first, second, .. } = call.route {
            for (e, &h) in [first, second].iter().zip(call.heights()) {
                let p = Pair::from_edge(*e, n);
                m_exact[p.u as usize][h as usize] += 1;
                m_exact[p.v as usize][h as usize] += 1;
            }
        }
    }
    // suffix sums, dropping index 0 (i starts at 1)
    let tail = |rows: Vec<Vec<u64>>| -> Vec<Vec<u64>> {
        rows.into_iter()
            .map(|row| {
                let mut out = vec![0; row.len().saturating_sub(1)];
                let mut acc = 0;
                for i in (1..row.len()).rev() {
                    acc += row[i];
                    out[i - 1] = acc;
                }
                out
            })
            .collect()
    };
    (tail(l_exact), tail(m_exact))
}

/// Fraction of offered calls that were blocked, `None` if nothing was offered.
pub fn blocking_estimate(counters: &Counters) -> Option<f64> {
    (counters.offered > 0).then(|| counters.blocked as f64 / counters.offered as f64)
}

/// Two-sided Student-t quantile for confidence `level` with `df` degrees of freedom.
pub fn t_quantile(level: f64, df: usize) -> f64 {
    let t = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
    t.inverse_cdf(0.5 + level / 2.0)
}

/// Half-width of the `level` confidence interval for the mean of `values`,
/// treated as i.i.d. batch statistics.
fn half_width(values: &[f64], level: f64) -> f64 {
    let k = values.len();
    // shifted by the first value so identical inputs give exactly zero
    let shift = values[0];
    let mean = values.iter().map(|x| x - shift).sum::<f64>() / k as f64;
    let var = values.iter().map(|x| (x - shift - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    t_quantile(level, k - 1) * (var / k as f64).sqrt()
}

/// Splits `samples` into `n_batches` equal consecutive batches (dropping the
/// oldest remainder) and returns the grand mean with its Student-t
/// half-width at confidence `level`.
pub fn batch_means_ci(samples: &[f64], n_batches: usize, level: f64) -> Result<(f64, f64)> {
    if n_batches < 2 || samples.len() < 2 * n_batches {
        return Err(Error::TooFewSamples { needed: 2 * n_batches.max(2), got: samples.len() });
    }
    let size = samples.len() / n_batches;
    let skip = samples.len() - size * n_batches;
    let means: Vec<f64> = samples[skip..]
        .chunks_exact(size)
        .map(|b| b.iter().sum::<f64>() / size as f64)
        .collect();
    let mean = means.iter().sum::<f64>() / n_batches as f64;
    Ok((mean, half_width(&means, level)))
}

/// Groups per-epoch `(numerator, denominator)` counts into `n_batches`
/// consecutive batches.
pub fn ratio_batches(counts: &[(u64, u64)], n_batches: usize) -> Result<Vec<(u64, u64)>> {
    if n_batches < 1 || counts.len() < n_batches {
        return Err(Error::TooFewSamples { needed: n_batches.max(1), got: counts.len() });
    }
    let size = counts.len() / n_batches;
    let skip = counts.len() - size * n_batches;
    Ok(counts[skip..]
        .chunks_exact(size)
        .map(|b| b.iter().fold((0, 0), |(x, y), &(a, c)| (x + a, y + c)))
        .collect())
}

/// Ratio estimate `sum(num) / sum(den)` over all batches with a batch-means
/// half-width from the per-batch ratios. Batches with a zero denominator
/// are ignored for the spread.
pub fn ratio_ci(batches: &[(u64, u64)], level: f64) -> Result<(f64, f64)> {
    let (num, den) = batches.iter().fold((0u64, 0u64), |(x, y), &(a, b)| (x + a, y + b));
    let ratios: Vec<f64> = batches
        .iter()
        .filter(|(_, d)| *d > 0)
        .map(|&(a, d)| a as f64 / d as f64)
        .collect();
    if den == 0 || ratios.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: ratios.len() });
    }
    Ok((num as f64 / den as f64, half_width(&ratios, level)))
}
