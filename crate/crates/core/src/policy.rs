//! Admission policies: sequential first-fit (DAR), best-of-d (BDAR) and
//! best-of-d over alternative routes only (BDAR*).

use rand::Rng;
use serde::Serialize;
use smallvec::SmallVec;

use crate::model::{EdgeId, NetworkState, Pair, PolicyKind, ProbeSampling, Route, SimParams};

pub type Probes = SmallVec<[u32; 4]>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Accept(Route),
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteDecision {
    pub outcome: Outcome,
    /// Intermediate nodes examined, in probe order.
    pub probes: Probes,
}

impl RouteDecision {
    fn direct(pair: Pair, n: u32) -> Self {
        RouteDecision { outcome: Outcome::Accept(Route::direct(pair, n)), probes: Probes::new() }
    }

    pub fn route(&self) -> Option<Route> {
        match self.outcome {
            Outcome::Accept(r) => Some(r),
            Outcome::Reject => None,
        }
    }
}

/// Load of a two-edge path: the larger alternative load of its edges.
#[inline]
pub fn path_load(state: &NetworkState, first: EdgeId, second: EdgeId) -> u32 {
    state.alt_load(first).max(state.alt_load(second))
}

/// Draws the next probe for `pair`, avoiding nodes already in `seen` when
/// sampling without replacement.
#[inline]
fn next_probe<R: Rng + ?Sized>(
    pair: Pair,
    n: u32,
    sampling: ProbeSampling,
    seen: &[u32],
    rng: &mut R,
) -> u32 {
    let m = n - 2;
    loop {
        let w = pair.intermediate(rng.random_range(0..m));
        if sampling == ProbeSampling::WithReplacement || !seen.contains(&w) {
            return w;
        }
    }
}

pub fn route_dar<R: Rng + ?Sized>(
    state: &NetworkState,
    pair: Pair,
    params: &SimParams,
    rng: &mut R,
) -> RouteDecision {
    let n = state.n();
    if state.b_direct().has_room(state.direct_load(pair.edge(n))) {
        return RouteDecision::direct(pair, n);
    }
    let mut probes = Probes::new();
    for _ in 0..params.d {
        let w = next_probe(pair, n, params.sampling, &probes, rng);
        probes.push(w);
        let (a, b) = pair.alt_edges(w, n);
        if state.b_alt().has_room(state.alt_load(a)) && state.b_alt().has_room(state.alt_load(b)) {
            return RouteDecision {
                outcome: Outcome::Accept(Route::Alternative { first: a, second: b, via: w }),
                probes,
            };
        }
    }
    RouteDecision { outcome: Outcome::Reject, probes }
}

pub fn route_bdar<R: Rng + ?Sized>(
    state: &NetworkState,
    pair: Pair,
    params: &SimParams,
    rng: &mut R,
) -> RouteDecision {
    let n = state.n();
    if state.b_direct().has_room(state.direct_load(pair.edge(n))) {
        return RouteDecision::direct(pair, n);
    }
    best_of_d(state, pair, params, rng)
}

pub fn route_bdar_star<R: Rng + ?Sized>(
    state: &NetworkState,
    pair: Pair,
    params: &SimParams,
    rng: &mut R,
) -> RouteDecision {
    best_of_d(state, pair, params, rng)
}

fn best_of_d<R: Rng + ?Sized>(
    state: &NetworkState,
    pair: Pair,
    params: &SimParams,
    rng: &mut R,
) -> RouteDecision {
    let n = state.n();
    let cap = state.b_alt();
    let mut probes = Probes::new();
    let mut best: Option<(u32, Route)> = None;
    let mut ties = 0u32;
    for _ in 0..params.d {
        let w = next_probe(pair, n, params.sampling, &probes, rng);
        probes.push(w);
        let (a, b) = pair.alt_edges(w, n);
        if !(cap.has_room(state.alt_load(a)) && cap.has_room(state.alt_load(b))) {
            continue;
        }
        let load = path_load(state, a, b);
        let route = Route::Alternative { first: a, second: b, via: w };
        match best {
            Some((l, _)) if load > l => {}
            Some((l, _)) if load == l => {
                // reservoir step: uniform over all minimizers seen so far
                ties += 1;
                if rng.random_range(0..ties) == 0 {
                    best = Some((load, route));
                }
            }
            _ => {
                best = Some((load, route));
                ties = 1;
            }
        }
    }
    RouteDecision {
        outcome: best.map_or(Outcome::Reject, |(_, r)| Outcome::Accept(r)),
        probes,
    }
}

/// Dispatches on `params.policy`.
pub fn decide<R: Rng + ?Sized>(
    state: &NetworkState,
    pair: Pair,
    params: &SimParams,
    rng: &mut R,
) -> RouteDecision {
    match params.policy {
        PolicyKind::Dar => route_dar(state, pair, params, rng),
        PolicyKind::Bdar => route_bdar(state, pair, params, rng),
        PolicyKind::BdarStar => route_bdar_star(state, pair, params, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{edge_index, new_network, Capacity};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(n: u32, d: u32, policy: PolicyKind, b_direct: u32, b_alt: u32) -> SimParams {
        SimParams {
            n,
            d,
            policy,
            b_direct: Capacity::Finite(b_direct),
            b_alt: Capacity::Finite(b_alt),
            ..SimParams::default()
        }
    }

    fn fill_edge(state: &mut NetworkState, u: u32, v: u32, target: u32) {
        // load edge (u,v) via calls between u and some w routed through v
        let n = state.n();
        let mut w = 0;
        while state.alt_load(edge_index(u, v, n).unwrap()) < target {
            if w != u && w != v {
                let r = Route::alternative(Pair::new(u, w, n).unwrap(), v, n).unwrap();
                state.admit_call(r, 1e9).unwrap();
            }
            w = (w + 1) % n;
        }
    }

    #[test]
    fn path_load_is_max_of_edges() {
        let p = params(6, 2, PolicyKind::BdarStar, 0, 10);
        let mut s = new_network(&p).unwrap();
        fill_edge(&mut s, 0, 1, 2);
        fill_edge(&mut s, 2, 3, 5);
        let a = edge_index(0, 1, 6).unwrap();
        let b = edge_index(2, 3, 6).unwrap();
        assert_eq!(path_load(&s, a, b), 5);
        let z = edge_index(4, 5, 6).unwrap();
        let y = edge_index(0, 5, 6).unwrap();
        assert_eq!(path_load(&s, z, y), 0);
    }

    #[test]
    fn path_at_capacity_is_unavailable() {
        let p = params(5, 3, PolicyKind::BdarStar, 0, 2);
        let mut s = new_network(&p).unwrap();
        fill_edge(&mut s, 0, 2, 2);
        let (a, b) = Pair::new(0, 1, 5).unwrap().alt_edges(2, 5);
        assert_eq!(path_load(&s, a, b), 2);
        assert!(!s.fits(&Route::Alternative { first: a, second: b, via: 2 }));
    }

    #[test]
    fn dar_prefers_direct() {
        let p = params(6, 2, PolicyKind::Dar, 1, 1);
        let s = new_network(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = route_dar(&s, Pair::new(0, 5, 6).unwrap(), &p, &mut rng);
        assert!(matches!(d.outcome, Outcome::Accept(Route::Direct { .. })));
        assert!(d.probes.is_empty());
    }

    #[test]
    fn dar_takes_first_free_alternative() {
        let p = params(6, 3, PolicyKind::Dar, 0, 1);
        let s = new_network(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = route_dar(&s, Pair::new(0, 5, 6).unwrap(), &p, &mut rng);
        assert_eq!(d.probes.len(), 1);
        match d.outcome {
            Outcome::Accept(Route::Alternative { via, .. }) => assert_eq!(via, d.probes[0]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn saturated_network_rejects_after_d_probes() {
        // B_alt = 0: every edge is at capacity from the start
        for policy in PolicyKind::ALL {
            let p = params(5, 2, policy, 0, 0);
            let s = new_network(&p).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let d = decide(&s, Pair::new(1, 3, 5).unwrap(), &p, &mut rng);
            assert_eq!(d.outcome, Outcome::Reject);
            assert_eq!(d.probes.len(), 2);
        }
    }

    #[test]
    fn bdar_picks_minimum_load_path() {
        // pair (0,1), intermediates 2,3,4 with path loads 2,1,3
        let p = params(5, 3, PolicyKind::Bdar, 0, 10);
        let mut s = new_network(&p).unwrap();
        fill_edge(&mut s, 0, 2, 2);
        fill_edge(&mut s, 1, 3, 1);
        fill_edge(&mut s, 0, 4, 3);
        let pair = Pair::new(0, 1, 5).unwrap();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = route_bdar(&s, pair, &p, &mut rng);
            assert_eq!(d.probes.len(), 3);
            match d.outcome {
                Outcome::Accept(Route::Alternative { via, .. }) => assert_eq!(via, 3),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn bdar_uses_direct_when_free() {
        let p = params(5, 3, PolicyKind::Bdar, 1, 0);
        let s = new_network(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = route_bdar(&s, Pair::new(0, 1, 5).unwrap(), &p, &mut rng);
        assert!(matches!(d.outcome, Outcome::Accept(Route::Direct { .. })));
    }

    #[test]
    fn bdar_star_never_routes_direct() {
        let mut p = params(6, 2, PolicyKind::BdarStar, 5, 3);
        p = p.validated().unwrap();
        let s = new_network(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let d = route_bdar_star(&s, Pair::new(2, 4, 6).unwrap(), &p, &mut rng);
            assert!(matches!(d.outcome, Outcome::Accept(Route::Alternative { .. })));
        }
    }

    #[test]
    fn bdar_star_finds_only_feasible_path() {
        let p = params(5, 3, PolicyKind::BdarStar, 0, 1);
        let mut s = new_network(&p).unwrap();
        // block intermediates 2 and 3 for pair (0,1); leave 4 free
        fill_edge(&mut s, 0, 2, 1);
        fill_edge(&mut s, 1, 3, 1);
        let pair = Pair::new(0, 1, 5).unwrap();
        let (a, b) = pair.alt_edges(4, 5);
        assert!(s.alt_load(a) == 0 && s.alt_load(b) == 0);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = route_bdar_star(&s, pair, &p, &mut rng);
            assert_eq!(d.route(), Some(Route::Alternative { first: a, second: b, via: 4 }));
        }
    }

    #[test]
    fn n3_single_candidate() {
        let p = params(3, 1, PolicyKind::BdarStar, 0, 1);
        let s = new_network(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = route_bdar_star(&s, Pair::new(0, 2, 3).unwrap(), &p, &mut rng);
        assert_eq!(d.probes.as_slice(), &[1]);
        assert!(d.route().is_some());
    }

    #[test]
    fn probes_without_replacement_are_distinct() {
        let p = params(7, 5, PolicyKind::BdarStar, 0, 10);
        let s = new_network(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let d = route_bdar_star(&s, Pair::new(1, 4, 7).unwrap(), &p, &mut rng);
            let mut seen = d.probes.to_vec();
            seen.sort();
            seen.dedup();
            assert_eq!(seen.len(), 5);
            assert!(!seen.contains(&1) && !seen.contains(&4));
        }
    }

    #[test]
    fn tie_break_is_uniform() {
        // d = n - 2 = 4 equally loaded free paths; each should win 1/4 of the time
        let p = params(6, 4, PolicyKind::BdarStar, 0, 10);
        let s = new_network(&p).unwrap();
        let pair = Pair::new(0, 1, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let trials = 40_000;
        let mut counts = [0u32; 6];
        for _ in 0..trials {
            if let Some(Route::Alternative { via, .. }) = route_bdar_star(&s, pair, &p, &mut rng).route() {
                counts[via as usize] += 1;
            }
        }
        let expected = trials as f64 / 4.0;
        let chi2: f64 = counts[2..]
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // chi-square, 3 degrees of freedom, 99% quantile
        assert!(chi2 < 11.345, "chi2 = {chi2}, counts = {counts:?}");
    }
}
