//! Continuous-time event loop.
//!
//! Arrivals over all `N` pairs are generated as one Poisson stream of rate
//! `lambda * N` with a uniformly drawn pair per arrival. Each admitted call
//! gets its exponential holding time at admission and a matching departure
//! event. Ties in event time are resolved by insertion order.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::percentile_from_histogram;
use crate::model::{lyapunov_v, CallId, NetworkState, Pair, Route, SimParams};
use crate::policy::{decide, Outcome, Probes};
use crate::queue::EventQueue;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrival { pair: Pair },
    Departure { call: CallId },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
}

impl Eq for Event {}

impl Ord for Event {
    // reversed: BinaryHeap is a max-heap and we want the earliest event on top
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub offered: u64,
    pub accepted_direct: u64,
    pub accepted_alternative: u64,
    pub blocked: u64,
    pub departed: u64,
}

impl Counters {
    pub fn accepted(&self) -> u64 {
        self.accepted_direct + self.accepted_alternative
    }

    /// Counts accumulated since `earlier`.
    pub fn since(&self, earlier: &Counters) -> Counters {
        Counters {
            offered: self.offered - earlier.offered,
            accepted_direct: self.accepted_direct - earlier.accepted_direct,
            accepted_alternative: self.accepted_alternative - earlier.accepted_alternative,
            blocked: self.blocked - earlier.blocked,
            departed: self.departed - earlier.departed,
        }
    }

    pub fn merge(&mut self, other: &Counters) {
        self.offered += other.offered;
        self.accepted_direct += other.accepted_direct;
        self.accepted_alternative += other.accepted_alternative;
        self.blocked += other.blocked;
        self.departed += other.departed;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventOutcome {
    Accepted { t: f64, pair: Pair, route: Route, call: CallId, probes: Probes },
    Blocked { t: f64, pair: Pair, probes: Probes },
    Departed { t: f64, call: CallId },
}

impl EventOutcome {
    pub fn time(&self) -> f64 {
        match *self {
            EventOutcome::Accepted { t, .. }
            | EventOutcome::Blocked { t, .. }
            | EventOutcome::Departed { t, .. } => t,
        }
    }
}

/// One line of the optional JSON-lines event trace.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord {
    pub t: f64,
    pub kind: &'static str,
    pub pair: Option<Pair>,
    pub decision: Option<&'static str>,
    pub route: Option<Route>,
    pub call: Option<CallId>,
}

impl From<&EventOutcome> for TraceRecord {
    fn from(o: &EventOutcome) -> Self {
        match *o {
            EventOutcome::Accepted { t, pair, route, call, .. } => TraceRecord {
                t,
                kind: "arrival",
                pair: Some(pair),
                decision: Some(if route.is_alternative() { "alternative" } else { "direct" }),
                route: Some(route),
                call: Some(call),
            },
            EventOutcome::Blocked { t, pair, .. } => TraceRecord {
                t,
                kind: "arrival",
                pair: Some(pair),
                decision: Some("blocked"),
                route: None,
                call: None,
            },
            EventOutcome::Departed { t, call } => TraceRecord {
                t,
                kind: "departure",
                pair: None,
                decision: None,
                route: None,
                call: Some(call),
            },
        }
    }
}

/// State observed at a sampling epoch. Counters are cumulative from the
/// start of the `run_until` call that produced the sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochSample {
    pub t: f64,
    pub max_load: u32,
    pub p95_load: u32,
    pub blocked: u64,
    pub offered: u64,
}

impl EpochSample {
    pub fn blocking_rate(&self) -> Option<f64> {
        (self.offered > 0).then(|| self.blocked as f64 / self.offered as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateSummary {
    pub clock: f64,
    pub active_calls: usize,
    pub max_alt_load: u32,
    pub lyapunov: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub t_start: f64,
    pub t_end: f64,
    pub events: u64,
    pub counters: Counters,
    pub final_state: StateSummary,
    pub samples: Vec<EpochSample>,
}

/// Callbacks invoked by [`Engine::run_with`].
pub trait Hooks {
    fn on_event(&mut self, _outcome: &EventOutcome) {}
    fn on_sample(&mut self, _sample: &EpochSample, _state: &NetworkState) {}
}

impl Hooks for () {}

pub struct Engine {
    params: SimParams,
    state: NetworkState,
    queue: EventQueue,
    rng: ChaCha8Rng,
    counters: Counters,
    next_seq: u64,
    interarrival: Option<Exp<f64>>,
    holding: Exp<f64>,
    events: u64,
}

impl Engine {
    pub fn new(params: &SimParams) -> Result<Engine> {
        Engine::with_stream(params, 0)
    }

    /// Engine whose random stream is `(params.seed, stream)`; distinct
    /// streams are independent replications.
    pub fn with_stream(params: &SimParams, stream: u64) -> Result<Engine> {
        let params = params.validated()?;
        let state = NetworkState::empty(params.n, params.b_direct, params.b_alt);
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(stream);
        let total_rate = params.lambda * params.num_pairs() as f64;
        let interarrival = if total_rate > 0.0 {
            Some(Exp::new(total_rate).map_err(|e| Error::config(e.to_string()))?)
        } else {
            None
        };
        let holding = Exp::new(params.mu).map_err(|e| Error::config(e.to_string()))?;
        // about 32 departures per bucket in steady state; ring spans 16 mean holding times
        let width = if total_rate > 0.0 { 32.0 / total_rate } else { 1.0 };
        let queue = EventQueue::new(width, 16.0 / params.mu);
        let mut engine = Engine {
            params,
            state,
            queue,
            rng,
            counters: Counters::default(),
            next_seq: 0,
            interarrival,
            holding,
            events: 0,
        };
        engine.schedule_arrival();
        Ok(engine)
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn clock(&self) -> f64 {
        self.state.clock
    }

    /// Events processed since construction.
    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn next_event(&mut self) -> Option<&Event> {
        self.queue.peek()
    }

    pub fn pending_departures(&self) -> usize {
        self.queue
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Departure { .. }))
            .count()
    }

    pub fn pending_arrivals(&self) -> usize {
        self.queue.len() - self.pending_departures()
    }

    fn push(&mut self, time: f64, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        let ev = Event { time, seq, kind };
        match kind {
            EventKind::Arrival { .. } => self.queue.set_arrival(ev),
            EventKind::Departure { .. } => self.queue.push_departure(ev),
        }
    }

    fn schedule_arrival(&mut self) {
        let Some(dist) = self.interarrival else { return };
        let t = self.state.clock + dist.sample(&mut self.rng);
        // uniform ordered pair u != v, hence uniform unordered pair
        let n = self.params.n;
        let u = self.rng.random_range(0..n);
        let mut v = self.rng.random_range(0..n - 1);
        if v >= u {
            v += 1;
        }
        let pair = Pair { u: u.min(v), v: u.max(v) };
        self.push(t, EventKind::Arrival { pair });
    }

    pub fn step(&mut self) -> Result<EventOutcome> {
        let ev = self.queue.pop().ok_or(Error::EmptyQueue)?;
        debug_assert!(ev.time >= self.state.clock);
        self.state.clock = ev.time;
        self.events += 1;
        let outcome = match ev.kind {
            EventKind::Arrival { pair } => {
                self.counters.offered += 1;
                let decision = decide(&self.state, pair, &self.params, &mut self.rng);
                let outcome = match decision.outcome {
                    Outcome::Accept(route) => {
                        debug_assert!(self.state.fits(&route));
                        let now = self.state.clock;
                        let t_depart = (now + self.holding.sample(&mut self.rng)).max(now.next_up());
                        let call = self.state.admit_unchecked(route, t_depart);
                        self.push(t_depart, EventKind::Departure { call: call.id });
                        if route.is_alternative() {
                            self.counters.accepted_alternative += 1;
                        } else {
                            self.counters.accepted_direct += 1;
                        }
                        EventOutcome::Accepted {
                            t: now,
                            pair,
                            route,
                            call: call.id,
                            probes: decision.probes,
                        }
                    }
                    Outcome::Reject => {
                        self.counters.blocked += 1;
                        EventOutcome::Blocked { t: ev.time, pair, probes: decision.probes }
                    }
                };
                self.schedule_arrival();
                outcome
            }
            EventKind::Departure { call } => {
                self.state.depart_call(call)?;
                self.counters.departed += 1;
                EventOutcome::Departed { t: ev.time, call }
            }
        };
        Ok(outcome)
    }

    /// Processes every event with time `<= t_end`, sampling every
    /// `sample_every` time units if given.
    pub fn run_until(&mut self, t_end: f64, sample_every: Option<f64>) -> RunReport {
        self.run_with(t_end, sample_every, &mut ())
    }

    pub fn run_with<H: Hooks>(
        &mut self,
        t_end: f64,
        sample_every: Option<f64>,
        hooks: &mut H,
    ) -> RunReport {
        let t_start = self.state.clock;
        let start_counters = self.counters;
        let start_events = self.events;
        let mut samples = Vec::new();
        let interval = sample_every.filter(|dt| *dt > 0.0 && dt.is_finite());
        let mut k = 1u64;
        let epoch = |k: u64| interval.map(|dt| t_start + k as f64 * dt);

        loop {
            let next_t = self.queue.peek().map(|e| e.time);
            while let Some(ep) = epoch(k) {
                if ep > t_end || next_t.is_some_and(|t| t <= ep) {
                    break;
                }
                self.state.clock = ep;
                let c = self.counters.since(&start_counters);
                let hist = self.state.alt_histogram();
                let sample = EpochSample {
                    t: ep,
                    max_load: self.state.max_alt_load(),
                    p95_load: percentile_from_histogram(hist, 0.95),
                    blocked: c.blocked,
                    offered: c.offered,
                };
                hooks.on_sample(&sample, &self.state);
                samples.push(sample);
                k += 1;
            }
            match next_t {
                Some(t) if t <= t_end => {
                    let outcome = self.step().expect("queue checked nonempty");
                    hooks.on_event(&outcome);
                }
                _ => break,
            }
        }
        if self.state.clock < t_end {
            self.state.clock = t_end;
        }
        RunReport {
            t_start,
            t_end: self.state.clock,
            events: self.events - start_events,
            counters: self.counters.since(&start_counters),
            final_state: StateSummary {
                clock: self.state.clock,
                active_calls: self.state.active_calls(),
                max_alt_load: self.state.max_alt_load(),
                lyapunov: lyapunov_v(&self.state),
            },
            samples,
        }
    }
}
