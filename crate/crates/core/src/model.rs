//! Network state on the complete graph: parameters, edge indexing, routes,
//! admitted calls and the load bookkeeping that goes with them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-edge channel capacity. `Unbounded` never rejects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "CapacityRepr", into = "CapacityRepr")]
pub enum Capacity {
    Finite(u32),
    Unbounded,
}

impl Capacity {
    /// True if a channel currently carrying `load` calls can take one more.
    #[inline]
    pub fn has_room(self, load: u32) -> bool {
        match self {
            Capacity::Finite(b) => load < b,
            Capacity::Unbounded => true,
        }
    }

    pub fn finite(self) -> Option<u32> {
        match self {
            Capacity::Finite(b) => Some(b),
            Capacity::Unbounded => None,
        }
    }

    pub fn is_zero(self) -> bool {
        self == Capacity::Finite(0)
    }
}

impl fmt::Display for Capacity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Capacity::Finite(b) => write!(f, "{b}"),
            Capacity::Unbounded => f.write_str("inf"),
        }
    }
}

impl FromStr for Capacity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "unbounded" | "infinity" => Ok(Capacity::Unbounded),
            other => other
                .parse::<u32>()
                .map(Capacity::Finite)
                .map_err(|_| Error::config(format!("bad capacity '{other}'"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CapacityRepr {
    Number(u32),
    Text(String),
}

impl TryFrom<CapacityRepr> for Capacity {
    type Error = Error;

    fn try_from(r: CapacityRepr) -> Result<Self> {
        match r {
            CapacityRepr::Number(b) => Ok(Capacity::Finite(b)),
            CapacityRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Capacity> for CapacityRepr {
    fn from(c: Capacity) -> Self {
        match c {
            Capacity::Finite(b) => CapacityRepr::Number(b),
            Capacity::Unbounded => CapacityRepr::Text("inf".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "dar")]
    Dar,
    #[serde(rename = "bdar")]
    Bdar,
    #[serde(rename = "bdar-star")]
    BdarStar,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Dar, PolicyKind::Bdar, PolicyKind::BdarStar];

    pub fn token(self) -> &'static str {
        match self {
            PolicyKind::Dar => "dar",
            PolicyKind::Bdar => "bdar",
            PolicyKind::BdarStar => "bdar-star",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dar" => Ok(PolicyKind::Dar),
            "bdar" => Ok(PolicyKind::Bdar),
            "bdar-star" | "bdar*" | "bdar_star" => Ok(PolicyKind::BdarStar),
            other => Err(Error::config(format!(
                "unknown policy '{other}' (expected dar | bdar | bdar-star)"
            ))),
        }
    }
}

/// How the `d` intermediate nodes are drawn for each diverted call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeSampling {
    #[default]
    WithoutReplacement,
    WithReplacement,
}

impl FromStr for ProbeSampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "without-replacement" | "without" => Ok(ProbeSampling::WithoutReplacement),
            "with-replacement" | "with" => Ok(ProbeSampling::WithReplacement),
            other => Err(Error::config(format!(
                "unknown sampling '{other}' (expected without-replacement | with-replacement)"
            ))),
        }
    }
}

/// Model parameters. Time is measured in arbitrary units; the harness uses
/// `mu = 1` so that `lambda` equals the offered load per pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub n: u32,
    /// Arrival rate per node pair.
    pub lambda: f64,
    /// Departure rate per call.
    pub mu: f64,
    pub b_direct: Capacity,
    pub b_alt: Capacity,
    pub d: u32,
    pub policy: PolicyKind,
    #[serde(default)]
    pub sampling: ProbeSampling,
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            n: 3,
            lambda: 1.0,
            mu: 1.0,
            b_direct: Capacity::Finite(0),
            b_alt: Capacity::Unbounded,
            d: 1,
            policy: PolicyKind::BdarStar,
            sampling: ProbeSampling::WithoutReplacement,
            seed: 0,
        }
    }
}

impl SimParams {
    /// Offered load per pair, `lambda / mu`.
    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }

    /// Number of node pairs (edges of the complete graph).
    pub fn num_pairs(&self) -> usize {
        num_edges(self.n)
    }

    /// Checks the parameter invariants and returns a normalized copy
    /// (BDAR* never uses the direct channel, so its capacity is forced to 0).
    pub fn validated(&self) -> Result<SimParams> {
        if self.n < 3 {
            return Err(Error::config(format!(
                "n = {} leaves no intermediate node (need n >= 3)",
                self.n
            )));
        }
        if self.n > 1 << 16 {
            return Err(Error::config(format!("n = {} is too large", self.n)));
        }
        if self.d < 1 {
            return Err(Error::config("d must be at least 1"));
        }
        if self.d > self.n - 2 {
            return Err(Error::config(format!(
                "d = {} exceeds the n - 2 = {} available intermediate nodes",
                self.d,
                self.n - 2
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::config(format!("arrival rate {} must be >= 0", self.lambda)));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::config(format!("departure rate {} must be > 0", self.mu)));
        }
        let mut p = self.clone();
        if p.policy == PolicyKind::BdarStar {
            p.b_direct = Capacity::Finite(0);
        }
        Ok(p)
    }
}

/// `N = n(n-1)/2`.
pub fn num_edges(n: u32) -> usize {
    let n = n as usize;
    n * n.saturating_sub(1) / 2
}

/// Dense edge index: lexicographic rank of `(min(u,v), max(u,v))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u32);

impl EdgeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[inline]
fn rank(a: u32, b: u32, n: u32) -> u32 {
    debug_assert!(a < b && b < n);
    let (a, b, n) = (a as u64, b as u64, n as u64);
    (a * (2 * n - a - 1) / 2 + (b - a - 1)) as u32
}

pub fn edge_index(u: u32, v: u32, n: u32) -> Result<EdgeId> {
    if u == v || u >= n || v >= n {
        return Err(Error::InvalidPair { u, v, n });
    }
    Ok(EdgeId(rank(u.min(v), u.max(v), n)))
}

/// Inverse of [`edge_index`]: the endpoints `(u, v)` with `u < v`.
pub fn edge_endpoints(edge: EdgeId, n: u32) -> (u32, u32) {
    let mut k = edge.0;
    let mut a = 0;
    loop {
        let row = n - a - 1;
        if k < row {
            return (a, a + 1 + k);
        }
        k -= row;
        a += 1;
    }
}

/// An unordered node pair, stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pair {
    pub u: u32,
    pub v: u32,
}

impl Pair {
    pub fn new(u: u32, v: u32, n: u32) -> Result<Pair> {
        if u == v || u >= n || v >= n {
            return Err(Error::InvalidPair { u, v, n });
        }
        Ok(Pair { u: u.min(v), v: u.max(v) })
    }

    pub fn from_edge(edge: EdgeId, n: u32) -> Pair {
        let (u, v) = edge_endpoints(edge, n);
        Pair { u, v }
    }

    #[inline]
    pub fn edge(self, n: u32) -> EdgeId {
        EdgeId(rank(self.u, self.v, n))
    }

    /// The `k`-th intermediate node, `k` in `[0, n-2)`, skipping both endpoints.
    #[inline]
    pub fn intermediate(self, k: u32) -> u32 {
        let mut w = k;
        if w >= self.u {
            w += 1;
        }
        if w >= self.v {
            w += 1;
        }
        w
    }

    /// The two edges `(u, via)` and `(via, v)` of the alternative path.
    #[inline]
    pub fn alt_edges(self, via: u32, n: u32) -> (EdgeId, EdgeId) {
        debug_assert!(via != self.u && via != self.v && via < n);
        (
            EdgeId(rank(self.u.min(via), self.u.max(via), n)),
            EdgeId(rank(self.v.min(via), self.v.max(via), n)),
        )
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.u, self.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Direct { edge: EdgeId },
    Alternative { first: EdgeId, second: EdgeId, via: u32 },
}

impl Route {
    pub fn direct(pair: Pair, n: u32) -> Route {
        Route::Direct { edge: pair.edge(n) }
    }

    pub fn alternative(pair: Pair, via: u32, n: u32) -> Result<Route> {
        if via >= n || via == pair.u || via == pair.v {
            return Err(Error::MalformedRoute(format!(
                "node {via} is not an intermediate for {pair}"
            )));
        }
        let (first, second) = pair.alt_edges(via, n);
        Ok(Route::Alternative { first, second, via })
    }

    pub fn is_alternative(&self) -> bool {
        matches!(self, Route::Alternative { .. })
    }

    /// Endpoints of the route as an unordered pair.
    pub fn endpoints(&self, n: u32) -> Pair {
        match *self {
            Route::Direct { edge } => Pair::from_edge(edge, n),
            Route::Alternative { first, second, via } => {
                let (a, b) = edge_endpoints(first, n);
                let (c, e) = edge_endpoints(second, n);
                let x = if a == via { b } else { a };
                let y = if c == via { e } else { c };
                Pair { u: x.min(y), v: x.max(y) }
            }
        }
    }

    fn check(&self, n: u32) -> Result<()> {
        let edges = num_edges(n) as u32;
        match *self {
            Route::Direct { edge } if edge.0 < edges => Ok(()),
            Route::Alternative { first, second, via }
                if first.0 < edges && second.0 < edges && first != second && via < n =>
            {
                let (a, b) = edge_endpoints(first, n);
                let (c, e) = edge_endpoints(second, n);
                let touches = |x: u32, y: u32| x == via || y == via;
                if touches(a, b) && touches(c, e) {
                    Ok(())
                } else {
                    Err(Error::MalformedRoute(format!(
                        "edges {first} and {second} do not meet at node {via}"
                    )))
                }
            }
            _ => Err(Error::MalformedRoute(format!("{self:?} is not valid for n = {n}"))),
        }
    }
}

/// Stable call handle: slot index in the low 32 bits, slot generation above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CallId(pub u64);

impl CallId {
    fn new(slot: u32, generation: u32) -> Self {
        CallId(((generation as u64) << 32) | slot as u64)
    }

    fn slot(self) -> usize {
        (self.0 & 0xffff_ffff) as usize
    }

    fn generation(self) -> u32 {
        (self.0 >> 32) as u32
    }
}

impl fmt::Display for CallId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Call {
    pub id: CallId,
    pub route: Route,
    pub t_admit: f64,
    pub t_depart: f64,
    /// Load of each occupied channel right after admission (1 + load before).
    /// Direct calls use only the first entry.
    #[serde(skip)]
    heights: [u32; 2],
}

impl Call {
    pub fn heights(&self) -> &[u32] {
        match self.route {
            Route::Direct { .. } => &self.heights[..1],
            Route::Alternative { .. } => &self.heights[..],
        }
    }
}

#[derive(Debug, Clone)]
struct Slot {
    generation: u32,
    call: Option<Call>,
}

/// Loads and active calls of one network. Loads are derived from the
/// admitted calls, so every reachable load vector is legal.
#[derive(Debug, Clone)]
pub struct NetworkState {
    n: u32,
    b_direct: Capacity,
    b_alt: Capacity,
    direct_load: Vec<u32>,
    alt_load: Vec<u32>,
    // alt_hist[l] = number of edges whose alternative load is l
    alt_hist: Vec<u64>,
    max_alt: u32,
    slots: Vec<Slot>,
    free: Vec<u32>,
    active_direct: usize,
    active_alt: usize,
    pub clock: f64,
}

pub fn new_network(params: &SimParams) -> Result<NetworkState> {
    let p = params.validated()?;
    Ok(NetworkState::empty(p.n, p.b_direct, p.b_alt))
}

impl NetworkState {
    /// An empty network with the given capacities. `n` must be at least 2.
    pub fn empty(n: u32, b_direct: Capacity, b_alt: Capacity) -> Self {
        let edges = num_edges(n);
        NetworkState {
            n,
            b_direct,
            b_alt,
            direct_load: vec![0; edges],
            alt_load: vec![0; edges],
            alt_hist: vec![edges as u64],
            max_alt: 0,
            slots: Vec::new(),
            free: Vec::new(),
            active_direct: 0,
            active_alt: 0,
            clock: 0.0,
        }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.alt_load.len()
    }

    pub fn b_direct(&self) -> Capacity {
        self.b_direct
    }

    pub fn b_alt(&self) -> Capacity {
        self.b_alt
    }

    #[inline]
    pub fn alt_load(&self, e: EdgeId) -> u32 {
        self.alt_load[e.index()]
    }

    #[inline]
    pub fn direct_load(&self, e: EdgeId) -> u32 {
        self.direct_load[e.index()]
    }

    pub fn alt_loads(&self) -> &[u32] {
        &self.alt_load
    }

    pub fn direct_loads(&self) -> &[u32] {
        &self.direct_load
    }

    /// Count of edges per alternative-load value; sums to `N`.
    pub fn alt_histogram(&self) -> &[u64] {
        &self.alt_hist[..=self.max_alt as usize]
    }

    /// Largest alternative load over all edges, maintained incrementally.
    pub fn max_alt_load(&self) -> u32 {
        self.max_alt
    }

    pub fn active_calls(&self) -> usize {
        self.active_alt + self.active_direct
    }

    pub fn active_alternative_calls(&self) -> usize {
        self.active_alt
    }

    pub fn active_direct_calls(&self) -> usize {
        self.active_direct
    }

    pub fn calls(&self) -> impl Iterator<Item = &Call> {
        self.slots.iter().filter_map(|s| s.call.as_ref())
    }

    pub fn call(&self, id: CallId) -> Option<&Call> {
        self.slots
            .get(id.slot())
            .filter(|s| s.generation == id.generation())
            .and_then(|s| s.call.as_ref())
    }

    /// True if every channel `route` would occupy has room for another call.
    #[inline]
    pub fn fits(&self, route: &Route) -> bool {
        match *route {
            Route::Direct { edge } => self.b_direct.has_room(self.direct_load(edge)),
            Route::Alternative { first, second, .. } => {
                self.b_alt.has_room(self.alt_load(first)) && self.b_alt.has_room(self.alt_load(second))
            }
        }
    }

    /// Records a new call on `route`. Fails without touching the state if
    /// any occupied channel is full.
    pub fn admit_call(&mut self, route: Route, t_depart: f64) -> Result<Call> {
        route.check(self.n)?;
        if !(t_depart > self.clock) {
            return Err(Error::OutOfDomain(format!(
                "departure time {t_depart} does not follow admission time {}",
                self.clock
            )));
        }
        match route {
            Route::Direct { edge } if !self.b_direct.has_room(self.direct_load(edge)) => {
                return Err(Error::CapacityExceeded { edge: edge.0 });
            }
            Route::Alternative { first, second, .. } => {
                for e in [first, second] {
                    if !self.b_alt.has_room(self.alt_load(e)) {
                        return Err(Error::CapacityExceeded { edge: e.0 });
                    }
                }
            }
            _ => {}
        }
        Ok(self.admit_unchecked(route, t_depart))
    }

    /// Admission for callers that already checked [`Self::fits`].
    pub(crate) fn admit_unchecked(&mut self, route: Route, t_depart: f64) -> Call {
        let heights = match route {
            Route::Direct { edge } => {
                self.direct_load[edge.index()] += 1;
                self.active_direct += 1;
                [self.direct_load[edge.index()], 0]
            }
            Route::Alternative { first, second, .. } => {
                let h1 = self.bump_alt(first);
                let h2 = self.bump_alt(second);
                self.active_alt += 1;
                [h1, h2]
            }
        };
        let slot = match self.free.pop() {
            Some(s) => s,
            None => {
                self.slots.push(Slot { generation: 0, call: None });
                (self.slots.len() - 1) as u32
            }
        };
        let entry = &mut self.slots[slot as usize];
        let call = Call {
            id: CallId::new(slot, entry.generation),
            route,
            t_admit: self.clock,
            t_depart,
            heights,
        };
        entry.call = Some(call.clone());
        call
    }

    pub fn depart_call(&mut self, id: CallId) -> Result<Call> {
        let slot = self
            .slots
            .get_mut(id.slot())
            .filter(|s| s.generation == id.generation() && s.call.is_some())
            .ok_or(Error::UnknownCall(id))?;
        let call = slot.call.take().expect("checked above");
        slot.generation = slot.generation.wrapping_add(1);
        self.free.push(id.slot() as u32);
        match call.route {
            Route::Direct { edge } => {
                self.direct_load[edge.index()] -= 1;
                self.active_direct -= 1;
            }
            Route::Alternative { first, second, .. } => {
                self.drop_alt(first);
                self.drop_alt(second);
                self.active_alt -= 1;
            }
        }
        Ok(call)
    }

    #[inline]
    fn bump_alt(&mut self, e: EdgeId) -> u32 {
        let l = self.alt_load[e.index()] as usize;
        self.alt_load[e.index()] += 1;
        self.alt_hist[l] -= 1;
        if self.alt_hist.len() <= l + 1 {
            self.alt_hist.push(0);
        }
        self.alt_hist[l + 1] += 1;
        if l as u32 + 1 > self.max_alt {
            self.max_alt = l as u32 + 1;
        }
        l as u32 + 1
    }

    #[inline]
    fn drop_alt(&mut self, e: EdgeId) {
        let l = self.alt_load[e.index()] as usize;
        self.alt_load[e.index()] -= 1;
        self.alt_hist[l] -= 1;
        self.alt_hist[l - 1] += 1;
        while self.max_alt > 0 && self.alt_hist[self.max_alt as usize] == 0 {
            self.max_alt -= 1;
        }
    }

    pub fn snapshot(&self) -> StateSnapshot {
        let mut calls: Vec<CallRecord> = self
            .calls()
            .map(|c| CallRecord {
                id: c.id,
                route: c.route,
                t_admit: c.t_admit,
                t_depart: c.t_depart,
            })
            .collect();
        calls.sort_by_key(|c| c.id.0);
        StateSnapshot {
            n: self.n,
            clock: self.clock,
            direct_load: self.direct_load.clone(),
            alt_load: self.alt_load.clone(),
            calls,
        }
    }
}

/// `V(x) = 1 + (1/2) * sum of alternative loads`, i.e. one plus the number
/// of active alternative calls.
pub fn lyapunov_v(state: &NetworkState) -> u64 {
    let total: u64 = state.alt_loads().iter().map(|&l| l as u64).sum();
    1 + total / 2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub id: CallId,
    pub route: Route,
    pub t_admit: f64,
    pub t_depart: f64,
}

/// JSON form of a [`NetworkState`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub n: u32,
    pub clock: f64,
    pub direct_load: Vec<u32>,
    pub alt_load: Vec<u32>,
    pub calls: Vec<CallRecord>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: u32, b_alt: Capacity) -> SimParams {
        SimParams {
            n,
            b_alt,
            ..SimParams::default()
        }
    }

    fn alt(n: u32, u: u32, v: u32, via: u32) -> Route {
        Route::alternative(Pair::new(u, v, n).unwrap(), via, n).unwrap()
    }

    #[test]
    fn new_network_sizes() {
        let s = new_network(&params(3, Capacity::Unbounded)).unwrap();
        assert_eq!(s.num_edges(), 3);
        assert!(s.alt_loads().iter().all(|&l| l == 0));
        assert_eq!(s.active_calls(), 0);
        assert_eq!(s.clock, 0.0);
        assert_eq!(new_network(&params(4, Capacity::Unbounded)).unwrap().num_edges(), 6);
    }

    #[test]
    fn new_network_rejects_bad_params() {
        assert!(matches!(new_network(&params(2, Capacity::Unbounded)), Err(Error::Config(_))));
        let mut p = params(4, Capacity::Unbounded);
        p.d = 3;
        assert!(new_network(&p).is_err());
        p.d = 2;
        p.mu = 0.0;
        assert!(new_network(&p).is_err());
        p.mu = 1.0;
        p.lambda = -1.0;
        assert!(new_network(&p).is_err());
    }

    #[test]
    fn bdar_star_forces_zero_direct_capacity() {
        let mut p = params(5, Capacity::Finite(3));
        p.b_direct = Capacity::Finite(7);
        assert_eq!(p.validated().unwrap().b_direct, Capacity::Finite(0));
        p.policy = PolicyKind::Dar;
        assert_eq!(p.validated().unwrap().b_direct, Capacity::Finite(7));
    }

    #[test]
    fn edge_index_examples() {
        assert_eq!(edge_index(0, 1, 4).unwrap(), EdgeId(0));
        assert_eq!(edge_index(1, 0, 4).unwrap(), EdgeId(0));
        // lexicographic enumeration: (0,1) (0,2) (0,3) (1,2) (1,3) (2,3)
        let pairs: Vec<(u32, u32)> =
            (0..4).flat_map(|a| (a + 1..4).map(move |b| (a, b))).collect();
        let pos = pairs.iter().position(|&p| p == (2, 3)).unwrap() as u32;
        assert_eq!(edge_index(2, 3, 4).unwrap(), EdgeId(pos));
        assert_eq!(pos, 5);
        assert!(edge_index(2, 2, 4).is_err());
        assert!(edge_index(0, 4, 4).is_err());
    }

    #[test]
    fn edge_index_is_bijective() {
        for n in 2..40 {
            for k in 0..num_edges(n) as u32 {
                let (u, v) = edge_endpoints(EdgeId(k), n);
                assert!(u < v && v < n);
                assert_eq!(edge_index(v, u, n).unwrap(), EdgeId(k));
            }
        }
    }

    #[test]
    fn intermediates_skip_endpoints() {
        let p = Pair::new(4, 1, 6).unwrap();
        let w: Vec<u32> = (0..4).map(|k| p.intermediate(k)).collect();
        assert_eq!(w, vec![0, 2, 3, 5]);
    }

    #[test]
    fn route_endpoints_match_pair() {
        let r = alt(5, 3, 1, 4);
        assert_eq!(r.endpoints(5), Pair { u: 1, v: 3 });
        assert!(Route::alternative(Pair::new(0, 1, 5).unwrap(), 1, 5).is_err());
        let bogus = Route::Alternative { first: EdgeId(0), second: EdgeId(9), via: 2 };
        assert!(matches!(bogus.check(5), Err(Error::MalformedRoute(_))));
    }

    #[test]
    fn admit_alternative_first_call() {
        let mut s = new_network(&params(4, Capacity::Unbounded)).unwrap();
        let r = alt(4, 0, 1, 2);
        let c = s.admit_call(r, 1.0).unwrap();
        assert_eq!(c.heights(), &[1, 1]);
        assert_eq!(s.alt_load(edge_index(0, 2, 4).unwrap()), 1);
        assert_eq!(s.alt_load(edge_index(2, 1, 4).unwrap()), 1);
        assert_eq!(s.alt_loads().iter().sum::<u32>(), 2);
        assert_eq!(s.direct_loads().iter().sum::<u32>(), 0);
        assert_eq!(lyapunov_v(&s), 2);
    }

    #[test]
    fn admit_rejects_full_edge_without_mutation() {
        let mut s = new_network(&params(4, Capacity::Finite(1))).unwrap();
        s.admit_call(alt(4, 0, 1, 2), 1.0).unwrap();
        let before = s.snapshot();
        let err = s.admit_call(alt(4, 0, 3, 2), 1.0).unwrap_err();
        assert_eq!(err, Error::CapacityExceeded { edge: edge_index(0, 2, 4).unwrap().0 });
        assert_eq!(s.snapshot(), before);
    }

    #[test]
    fn direct_admission_only_touches_direct_channel() {
        let mut p = params(4, Capacity::Finite(2));
        p.policy = PolicyKind::Dar;
        p.b_direct = Capacity::Finite(1);
        let mut s = new_network(&p).unwrap();
        let pair = Pair::new(1, 3, 4).unwrap();
        let c = s.admit_call(Route::direct(pair, 4), 2.0).unwrap();
        assert_eq!(c.heights(), &[1]);
        assert_eq!(s.direct_load(pair.edge(4)), 1);
        assert!(s.alt_loads().iter().all(|&l| l == 0));
        assert!(s.admit_call(Route::direct(pair, 4), 2.0).is_err());
    }

    #[test]
    fn depart_restores_state() {
        let mut s = new_network(&params(5, Capacity::Unbounded)).unwrap();
        s.admit_call(alt(5, 0, 1, 2), 1.0).unwrap();
        let before = s.snapshot();
        let c = s.admit_call(alt(5, 0, 3, 2), 1.0).unwrap();
        assert_eq!(c.heights(), &[2, 1]);
        s.depart_call(c.id).unwrap();
        assert_eq!(s.snapshot(), before);
        assert_eq!(s.alt_load(edge_index(0, 2, 5).unwrap()), 1);
        assert_eq!(s.depart_call(c.id), Err(Error::UnknownCall(c.id)));
    }

    #[test]
    fn call_ids_are_not_reused() {
        let mut s = new_network(&params(5, Capacity::Unbounded)).unwrap();
        let a = s.admit_call(alt(5, 0, 1, 2), 1.0).unwrap();
        s.depart_call(a.id).unwrap();
        let b = s.admit_call(alt(5, 0, 1, 2), 1.0).unwrap();
        assert_ne!(a.id, b.id);
        assert!(s.call(a.id).is_none());
        assert!(s.call(b.id).is_some());
    }

    #[test]
    fn lyapunov_counts_calls() {
        let mut s = new_network(&params(5, Capacity::Unbounded)).unwrap();
        assert_eq!(lyapunov_v(&s), 1);
        s.admit_call(alt(5, 0, 1, 2), 1.0).unwrap();
        assert_eq!(lyapunov_v(&s), 2);
        s.admit_call(alt(5, 0, 1, 2), 1.0).unwrap();
        s.admit_call(alt(5, 3, 4, 0), 1.0).unwrap();
        assert_eq!(lyapunov_v(&s), 4);
    }

    #[test]
    fn admit_requires_future_departure() {
        let mut s = new_network(&params(4, Capacity::Unbounded)).unwrap();
        s.clock = 3.0;
        assert!(s.admit_call(alt(4, 0, 1, 2), 3.0).is_err());
    }

    #[test]
    fn snapshot_json_shape() {
        let mut s = new_network(&params(3, Capacity::Unbounded)).unwrap();
        s.admit_call(alt(3, 0, 1, 2), 0.5).unwrap();
        let v = serde_json::to_value(s.snapshot()).unwrap();
        assert_eq!(v["n"], 3);
        assert_eq!(v["alt_load"], serde_json::json!([0, 1, 1]));
        assert_eq!(v["calls"][0]["route"]["alternative"]["via"], 2);
        assert_eq!(v["calls"][0]["t_depart"], 0.5);
    }

    #[test]
    fn capacity_parsing() {
        assert_eq!("inf".parse::<Capacity>().unwrap(), Capacity::Unbounded);
        assert_eq!("4".parse::<Capacity>().unwrap(), Capacity::Finite(4));
        assert!("x".parse::<Capacity>().is_err());
        let c: Capacity = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(c, Capacity::Unbounded);
        let c: Capacity = serde_json::from_str("3").unwrap();
        assert_eq!(c, Capacity::Finite(3));
        assert!(Capacity::Unbounded.has_room(u32::MAX - 1));
        assert!(!Capacity::Finite(2).has_room(2));
    }

    #[test]
    fn policy_tokens() {
        for p in PolicyKind::ALL {
            assert_eq!(p.token().parse::<PolicyKind>().unwrap(), p);
        }
        assert!("sticky".parse::<PolicyKind>().is_err());
    }
}
