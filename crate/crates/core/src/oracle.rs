//! Exact analysis of tiny instances.
//!
//! The chain state is the multiset of active calls by route type (pair plus
//! direct link or intermediate node). Edge loads alone do not determine
//! which departures are possible, since one load vector can come from
//! several sets of two-hop paths; the call-level state is Markov.
//!
//! Routing probabilities are computed by enumerating every probe sequence
//! the policy could draw, independently of the sampling code in
//! [`crate::policy`].

use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{num_edges, Capacity, EdgeId, Pair, PolicyKind, ProbeSampling, Route, SimParams};

pub const DEFAULT_MAX_STATES: usize = 1_000_000;
pub const DEFAULT_TOL: f64 = 1e-10;

/// Chains up to this size are solved with a dense LU factorization.
const DENSE_LIMIT: usize = 1500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RouteType {
    pub pair: Pair,
    pub route: Route,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainOptions {
    pub max_states: usize,
    /// Capacity used in place of an unbounded alternative channel.
    pub truncate_unbounded: Option<u32>,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions { max_states: DEFAULT_MAX_STATES, truncate_unbounded: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainModel {
    pub params: SimParams,
    pub route_types: Vec<RouteType>,
    /// Active-call count per route type, one vector per state; state 0 is empty.
    pub states: Vec<Vec<u8>>,
    pub rates: Vec<Transition>,
    /// Probability that an arrival (uniform pair, exact probe randomness)
    /// is blocked in each state.
    #[serde(skip)]
    pub block_prob: Vec<f64>,
    #[serde(skip)]
    max_alt_load: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDist {
    pub pi: Vec<f64>,
    /// `max_j |(pi Q)_j|`.
    pub residual: f64,
}

/// Where an arriving call ends up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Placement {
    Direct,
    Via(u32),
    Blocked,
}

/// Exact distribution of the routing decision for one arrival on `pair`,
/// given the current direct and alternative loads.
pub fn routing_distribution(
    params: &SimParams,
    direct_load: &[u32],
    alt_load: &[u32],
    pair: Pair,
) -> Vec<(Placement, f64)> {
    let n = params.n;
    let edge = pair.edge(n).index();
    if params.policy != PolicyKind::BdarStar && params.b_direct.has_room(direct_load[edge]) {
        return vec![(Placement::Direct, 1.0)];
    }
    let nodes: Vec<u32> = (0..n - 2).map(|k| pair.intermediate(k)).collect();
    let feasible = |w: u32| {
        let (a, b) = pair.alt_edges(w, n);
        params.b_alt.has_room(alt_load[a.index()]) && params.b_alt.has_room(alt_load[b.index()])
    };
    let load = |w: u32| {
        let (a, b) = pair.alt_edges(w, n);
        alt_load[a.index()].max(alt_load[b.index()])
    };
    let d = params.d as usize;
    let seqs = probe_sequences(nodes.len(), d, params.sampling);
    let weight = 1.0 / seqs.len() as f64;
    let mut acc: HashMap<Placement, f64> = HashMap::new();
    for seq in &seqs {
        let probes: Vec<u32> = seq.iter().map(|&i| nodes[i]).collect();
        match params.policy {
            PolicyKind::Dar => {
                let p = probes.iter().find(|&&w| feasible(w)).map_or(Placement::Blocked, |&w| Placement::Via(w));
                *acc.entry(p).or_default() += weight;
            }
            PolicyKind::Bdar | PolicyKind::BdarStar => {
                let best = probes.iter().filter(|&&w| feasible(w)).map(|&w| load(w)).min();
                match best {
                    None => *acc.entry(Placement::Blocked).or_default() += weight,
                    Some(m) => {
                        let winners: Vec<u32> =
                            probes.iter().copied().filter(|&w| feasible(w) && load(w) == m).collect();
                        let share = weight / winners.len() as f64;
                        for w in winners {
                            *acc.entry(Placement::Via(w)).or_default() += share;
                        }
                    }
                }
            }
        }
    }
    let mut out: Vec<(Placement, f64)> = acc.into_iter().collect();
    out.sort_by_key(|(p, _)| match p {
        Placement::Direct => (0, 0),
        Placement::Via(w) => (1, *w),
        Placement::Blocked => (2, 0),
    });
    out
}

/// Every probe sequence over `m` candidates of length `d`, each equally
/// likely: ordered without repetition, or ordered with repetition.
fn probe_sequences(m: usize, d: usize, sampling: ProbeSampling) -> Vec<Vec<usize>> {
    fn rec(m: usize, d: usize, distinct: bool, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for i in 0..m {
            if distinct && cur.contains(&i) {
                continue;
            }
            cur.push(i);
            rec(m, d, distinct, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, d, sampling == ProbeSampling::WithoutReplacement, &mut Vec::new(), &mut out);
    out
}

fn route_types(params: &SimParams) -> Vec<RouteType> {
    let n = params.n;
    let mut types = Vec::new();
    for k in 0..num_edges(n) as u32 {
        let pair = Pair::from_edge(EdgeId(k), n);
        if !params.b_direct.is_zero() {
            types.push(RouteType { pair, route: Route::direct(pair, n) });
        }
        if !params.b_alt.is_zero() {
            for j in 0..n - 2 {
                let via = pair.intermediate(j);
                let route = Route::alternative(pair, via, n).expect("valid intermediate");
                types.push(RouteType { pair, route });
            }
        }
    }
    types
}

fn loads(types: &[RouteType], counts: &[u8], edges: usize) -> (Vec<u32>, Vec<u32>) {
    let mut direct = vec![0; edges];
    let mut alt = vec![0; edges];
    for (t, &c) in types.iter().zip(counts) {
        match t.route {
            Route::Direct { edge } => direct[edge.index()] += c as u32,
            Route::Alternative { first, second, .. } => {
                alt[first.index()] += c as u32;
                alt[second.index()] += c as u32;
            }
        }
    }
    (direct, alt)
}

/// Breadth-first enumeration of the states reachable from the empty network.
pub fn build_chain(params: &SimParams, opts: ChainOptions) -> Result<ChainModel> {
    let mut params = params.validated()?;
    if params.b_alt == Capacity::Unbounded {
        match opts.truncate_unbounded {
            Some(b) => params.b_alt = Capacity::Finite(b),
            None => {
                return Err(Error::OutOfDomain(
                    "exact chain needs a finite alternative capacity (or a truncation)".into(),
                ))
            }
        }
    }
    if params.b_direct == Capacity::Unbounded {
        return Err(Error::OutOfDomain("exact chain needs a finite direct capacity".into()));
    }
    let cap = |c: Capacity| c.finite().unwrap_or(0);
    if cap(params.b_direct) > u8::MAX as u32 || cap(params.b_alt) > u8::MAX as u32 {
        return Err(Error::OutOfDomain("capacities above 255 are not supported".into()));
    }

    let n = params.n;
    let edges = num_edges(n);
    let types = route_types(&params);
    let type_index: HashMap<(Pair, Placement), usize> = types
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let place = match t.route {
                Route::Direct { .. } => Placement::Direct,
                Route::Alternative { via, .. } => Placement::Via(via),
            };
            ((t.pair, place), i)
        })
        .collect();
    let pairs: Vec<Pair> = (0..edges as u32).map(|k| Pair::from_edge(EdgeId(k), n)).collect();

    let mut index: HashMap<Vec<u8>, usize> = HashMap::new();
    let mut states: Vec<Vec<u8>> = Vec::new();
    let mut queue = VecDeque::new();
    let empty = vec![0u8; types.len()];
    index.insert(empty.clone(), 0);
    states.push(empty);
    queue.push_back(0usize);

    let mut rates = Vec::new();
    let mut block_prob = Vec::new();
    let mut max_alt_load = Vec::new();
    while let Some(s) = queue.pop_front() {
        let counts = states[s].clone();
        let (direct, alt) = loads(&types, &counts, edges);
        max_alt_load.push(alt.iter().copied().max().unwrap_or(0));
        let mut blocked = 0.0;
        let mut out: HashMap<usize, f64> = HashMap::new();
        let mut visit = |next: Vec<u8>, rate: f64, out: &mut HashMap<usize, f64>| -> Result<()> {
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    if states.len() >= opts.max_states {
                        return Err(Error::StateSpaceExceeded { bound: opts.max_states });
                    }
                    let id = states.len();
                    index.insert(next.clone(), id);
                    states.push(next);
                    queue.push_back(id);
                    id
                }
            };
            *out.entry(id).or_default() += rate;
            Ok(())
        };
        if params.lambda > 0.0 {
            for &pair in &pairs {
                for (place, p) in routing_distribution(&params, &direct, &alt, pair) {
                    if place == Placement::Blocked {
                        blocked += p;
                        continue;
                    }
                    let t = type_index[&(pair, place)];
                    let mut next = counts.clone();
                    next[t] += 1;
                    visit(next, params.lambda * p, &mut out)?;
                }
            }
        } else {
            blocked = edges as f64;
        }
        for (t, &c) in counts.iter().enumerate() {
            if c > 0 {
                let mut next = counts.clone();
                next[t] -= 1;
                visit(next, params.mu * c as f64, &mut out)?;
            }
        }
        block_prob.push(blocked / edges as f64);
        let mut out: Vec<(usize, f64)> = out.into_iter().filter(|&(_, r)| r > 0.0).collect();
        out.sort_by_key(|&(to, _)| to);
        rates.extend(out.into_iter().map(|(to, rate)| Transition { from: s, to, rate }));
    }
    Ok(ChainModel { params, route_types: types, states, rates, block_prob, max_alt_load })
}

impl ChainModel {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    fn outflow(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for t in &self.rates {
            out[t.from] += t.rate;
        }
        out
    }

    /// `max_j |(pi Q)_j|` for the generator of this chain.
    pub fn residual(&self, pi: &[f64]) -> f64 {
        let mut r = vec![0.0; self.len()];
        for t in &self.rates {
            let flow = pi[t.from] * t.rate;
            r[t.to] += flow;
            r[t.from] -= flow;
        }
        r.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// JSON `{states, rates}` plus the route-type legend.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "route_types": self.route_types,
            "states": self.states,
            "rates": self.rates,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Auto,
    Dense,
    Power { max_iter: usize },
}

pub fn stationary_dist(chain: &ChainModel, tol: f64) -> Result<StationaryDist> {
    stationary_dist_with(chain, tol, SolveMethod::Auto)
}

pub fn stationary_dist_with(chain: &ChainModel, tol: f64, method: SolveMethod) -> Result<StationaryDist> {
    let method = match method {
        SolveMethod::Auto if chain.len() <= DENSE_LIMIT => SolveMethod::Dense,
        SolveMethod::Auto => SolveMethod::Power { max_iter: 10_000_000 },
        m => m,
    };
    let pi = match method {
        SolveMethod::Dense => solve_dense(chain)?,
        SolveMethod::Power { max_iter } => solve_power(chain, tol, max_iter)?,
        SolveMethod::Auto => unreachable!(),
    };
    let residual = chain.residual(&pi);
    if residual > tol {
        return Err(Error::NoConvergence { iterations: 0, residual });
    }
    Ok(StationaryDist { pi, residual })
}

/// Solves `pi Q = 0` with the last balance equation replaced by `sum pi = 1`.
fn solve_dense(chain: &ChainModel) -> Result<Vec<f64>> {
    let s = chain.len();
    let mut a = DMatrix::<f64>::zeros(s, s);
    for t in &chain.rates {
        // row j of Q^T collects inflow into j
        a[(t.to, t.from)] += t.rate;
        a[(t.from, t.from)] -= t.rate;
    }
    for j in 0..s {
        a[(s - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(s);
    b[s - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or(Error::NoConvergence { iterations: 0, residual: f64::INFINITY })?;
    let mut pi: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let sum: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= sum);
    Ok(pi)
}

/// Power iteration on the uniformized kernel `P = I + Q / L`, with `L`
/// 1% above the largest total outflow rate.
fn solve_power(chain: &ChainModel, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let s = chain.len();
    let outflow = chain.outflow();
    let unif = outflow.iter().fold(0.0f64, |m, &x| m.max(x)) * 1.01;
    if unif == 0.0 {
        return Ok(vec![1.0 / s as f64; s]);
    }
    let stay: Vec<f64> = outflow.iter().map(|o| 1.0 - o / unif).collect();
    let mut pi = vec![1.0 / s as f64; s];
    let mut next = vec![0.0; s];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        for (j, v) in next.iter_mut().enumerate() {
            *v = pi[j] * stay[j];
        }
        for t in &chain.rates {
            next[t.to] += pi[t.from] * t.rate / unif;
        }
        let sum: f64 = next.iter().sum();
        for (p, v) in pi.iter_mut().zip(&next) {
            *p = v / sum;
        }
        if it % 16 == 0 {
            residual = chain.residual(&pi);
            if residual <= tol {
                return Ok(pi);
            }
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual })
}

/// Stationary probability that an arriving call is blocked (PASTA).
pub fn exact_blocking(chain: &ChainModel, dist: &StationaryDist) -> f64 {
    chain.block_prob.iter().zip(&dist.pi).map(|(b, p)| b * p).sum()
}

/// Stationary distribution of the maximum alternative load over edges.
pub fn max_load_distribution(chain: &ChainModel, dist: &StationaryDist) -> Vec<f64> {
    let top = chain.max_alt_load.iter().copied().max().unwrap_or(0) as usize;
    let mut out = vec![0.0; top + 1];
    for (&m, &p) in chain.max_alt_load.iter().zip(&dist.pi) {
        out[m as usize] += p;
    }
    out
}

/// Erlang loss probability for `servers` circuits at offered load `rho`,
/// by the recursion `E_k = rho E_{k-1} / (k + rho E_{k-1})`, `E_0 = 1`.
pub fn erlang_b(servers: u32, rho: f64) -> f64 {
    (1..=servers).fold(1.0, |e, k| rho * e / (k as f64 + rho * e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: u32, b_alt: u32, d: u32, policy: PolicyKind) -> SimParams {
        SimParams {
            n,
            d,
            policy,
            b_alt: Capacity::Finite(b_alt),
            b_direct: Capacity::Finite(0),
            lambda: 1.0,
            mu: 1.0,
            ..SimParams::default()
        }
    }

    /// Independent count of legal call configurations: every multiset of
    /// alternative routes keeping each edge at or below `b`.
    fn count_legal(n: u32, b: u32) -> usize {
        let p = params(n, b, 1, PolicyKind::BdarStar);
        let types = route_types(&p);
        fn rec(types: &[RouteType], i: usize, alt: &mut Vec<u32>, b: u32) -> usize {
            if i == types.len() {
                return 1;
            }
            let Route::Alternative { first, second, .. } = types[i].route else { unreachable!() };
            let mut total = 0;
            let mut added = 0;
            loop {
                total += rec(types, i + 1, alt, b);
                if alt[first.index()] >= b || alt[second.index()] >= b {
                    break;
                }
                alt[first.index()] += 1;
                alt[second.index()] += 1;
                added += 1;
            }
            alt[first.index()] -= added;
            alt[second.index()] -= added;
            total
        }
        rec(&types, 0, &mut vec![0; num_edges(n)], b)
    }

    #[test]
    fn three_node_chain_has_four_states() {
        let chain = build_chain(&params(3, 1, 1, PolicyKind::BdarStar), ChainOptions::default()).unwrap();
        assert_eq!(chain.len(), 4);
        let dist = stationary_dist(&chain, DEFAULT_TOL).unwrap();
        for p in &dist.pi {
            assert!((p - 0.25).abs() < 1e-12);
        }
        assert!((exact_blocking(&chain, &dist) - 0.75).abs() < 1e-12);
        // detailed balance on each empty <-> busy edge: pi_0 * lambda = pi_busy * mu
        for t in chain.rates.iter().filter(|t| t.from == 0) {
            assert!((dist.pi[0] * t.rate - dist.pi[t.to] * 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_capacity_chain() {
        let chain = build_chain(&params(3, 0, 1, PolicyKind::BdarStar), ChainOptions::default()).unwrap();
        assert_eq!(chain.len(), 1);
        let dist = stationary_dist(&chain, DEFAULT_TOL).unwrap();
        assert_eq!(dist.pi, vec![1.0]);
        assert_eq!(exact_blocking(&chain, &dist), 1.0);
    }

    #[test]
    fn four_node_state_count_matches_enumeration() {
        for b in 1..=2 {
            let chain = build_chain(&params(4, b, 1, PolicyKind::BdarStar), ChainOptions::default()).unwrap();
            assert_eq!(chain.len(), count_legal(4, b), "b = {b}");
        }
    }

    #[test]
    fn solvers_agree() {
        let chain = build_chain(&params(4, 2, 2, PolicyKind::Dar), ChainOptions::default()).unwrap();
        let a = stationary_dist_with(&chain, 1e-11, SolveMethod::Dense).unwrap();
        let b = stationary_dist_with(&chain, 1e-11, SolveMethod::Power { max_iter: 1_000_000 }).unwrap();
        let diff = a.pi.iter().zip(&b.pi).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff < 1e-8, "{diff}");
        assert!((a.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(a.residual <= 1e-11 && b.residual <= 1e-11);
    }

    #[test]
    fn state_bound_is_enforced() {
        let opts = ChainOptions { max_states: 10, ..ChainOptions::default() };
        let err = build_chain(&params(4, 2, 1, PolicyKind::BdarStar), opts).unwrap_err();
        assert_eq!(err, Error::StateSpaceExceeded { bound: 10 });
    }

    #[test]
    fn unbounded_needs_truncation() {
        let mut p = params(3, 1, 1, PolicyKind::BdarStar);
        p.b_alt = Capacity::Unbounded;
        assert!(build_chain(&p, ChainOptions::default()).is_err());
        p.lambda = 0.05;
        let opts = ChainOptions { truncate_unbounded: Some(12), ..ChainOptions::default() };
        let chain = build_chain(&p, opts).unwrap();
        let dist = stationary_dist(&chain, DEFAULT_TOL).unwrap();
        assert!(exact_blocking(&chain, &dist) < 1e-12);
    }

    #[test]
    fn direct_only_chain_is_erlang() {
        // B_alt = 0 under DAR: each pair is an independent M/M/B/B queue
        for (b, rho) in [(1u32, 1.0), (2, 1.0), (3, 2.5)] {
            let mut p = params(3, 0, 1, PolicyKind::Dar);
            p.b_direct = Capacity::Finite(b);
            p.lambda = rho;
            let chain = build_chain(&p, ChainOptions::default()).unwrap();
            assert_eq!(chain.len(), ((b + 1) as usize).pow(3));
            let dist = stationary_dist(&chain, DEFAULT_TOL).unwrap();
            assert!((exact_blocking(&chain, &dist) - erlang_b(b, rho)).abs() < 1e-9);
        }
    }

    #[test]
    fn routing_distribution_sums_to_one() {
        let p = params(6, 2, 3, PolicyKind::Bdar);
        let alt = vec![0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2];
        let direct = vec![0; 15];
        for k in 0..15 {
            let pair = Pair::from_edge(EdgeId(k), 6);
            let dist = routing_distribution(&p, &direct, &alt, pair);
            let total: f64 = dist.iter().map(|(_, x)| x).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dar_first_fit_probabilities() {
        // n = 5, pair (0,1), intermediates 2,3,4; only via 4 is feasible.
        // Without replacement, d = 2: P(accept) = 1 - P(both probes in {2,3}) = 1 - 2/6.
        let mut p = params(5, 1, 2, PolicyKind::Dar);
        let n = 5;
        let mut alt = vec![0; 10];
        alt[crate::model::edge_index(0, 2, n).unwrap().index()] = 1;
        alt[crate::model::edge_index(1, 3, n).unwrap().index()] = 1;
        let direct = vec![0; 10];
        let pair = Pair::new(0, 1, n).unwrap();
        let dist: HashMap<Placement, f64> =
            routing_distribution(&p, &direct, &alt, pair).into_iter().collect();
        assert!((dist[&Placement::Via(4)] - 4.0 / 6.0).abs() < 1e-12);
        assert!((dist[&Placement::Blocked] - 2.0 / 6.0).abs() < 1e-12);
        // with replacement: 1 - (2/3)^2
        p.sampling = ProbeSampling::WithReplacement;
        let dist: HashMap<Placement, f64> =
            routing_distribution(&p, &direct, &alt, pair).into_iter().collect();
        assert!((dist[&Placement::Via(4)] - 5.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn erlang_examples() {
        assert_eq!(erlang_b(0, 3.7), 1.0);
        assert!((erlang_b(1, 1.0) - 0.5).abs() < 1e-15);
        assert!((erlang_b(2, 1.0) - 0.2).abs() < 1e-15);
    }

    fn erlang_direct_sum(b: u32, rho: f64) -> f64 {
        // terms rho^i / i! built incrementally to stay finite for b <= 100
        let mut term = 1.0;
        let mut sum = 1.0;
        for i in 1..=b {
            term *= rho / i as f64;
            sum += term;
        }
        term / sum
    }

    #[test]
    fn erlang_recursion_matches_direct_sum() {
        for b in 0..=100 {
            for k in 1..=50 {
                let rho = k as f64;
                let (r, s) = (erlang_b(b, rho), erlang_direct_sum(b, rho));
                assert!(((r - s) / s).abs() < 1e-12, "b={b} rho={rho}: {r} vs {s}");
            }
        }
    }

    #[test]
    fn erlang_monotone() {
        for rho in [0.5, 1.0, 4.0, 20.0] {
            for b in 0..60 {
                assert!(erlang_b(b + 1, rho) < erlang_b(b, rho));
            }
        }
        for b in 1..30 {
            for k in 1..40 {
                assert!(erlang_b(b, k as f64 * 0.5) < erlang_b(b, (k + 1) as f64 * 0.5));
            }
        }
    }

    #[test]
    fn max_load_distribution_sums_to_one() {
        let chain = build_chain(&params(4, 2, 2, PolicyKind::BdarStar), ChainOptions::default()).unwrap();
        let dist = stationary_dist(&chain, DEFAULT_TOL).unwrap();
        let m = max_load_distribution(&chain, &dist);
        assert_eq!(m.len(), 3);
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let json = chain.to_json();
        assert_eq!(json["states"].as_array().unwrap().len(), chain.len());
    }
}
