//! Pending-event set for the engine.
//!
//! The engine keeps at most one arrival pending, so arrivals get a dedicated
//! slot. Departures live in a calendar queue: a ring of time buckets of
//! fixed width, sorted lazily when the bucket becomes current, with a heap
//! for events beyond the ring horizon. Pop order is `(time, seq)`.

use std::collections::BinaryHeap;

use crate::engine::Event;

#[derive(Debug, Clone)]
pub(crate) struct EventQueue {
    arrival: Option<Event>,
    departures: Calendar,
}

impl EventQueue {
    /// `width` is the bucket width in time units, `horizon` the time span
    /// covered by the ring before events spill into the overflow heap.
    pub fn new(width: f64, horizon: f64) -> Self {
        EventQueue { arrival: None, departures: Calendar::new(width, horizon) }
    }

    pub fn len(&self) -> usize {
        self.arrival.is_some() as usize + self.departures.len
    }

    pub fn set_arrival(&mut self, ev: Event) {
        debug_assert!(self.arrival.is_none());
        self.arrival = Some(ev);
    }

    pub fn push_departure(&mut self, ev: Event) {
        self.departures.push(ev);
    }

    /// Departures are only settled up to the pending arrival's bucket, so
    /// the calendar cursor never runs ahead of the clock.
    fn limit(&self) -> u64 {
        self.arrival.as_ref().map_or(u64::MAX, |a| self.departures.bucket_of(a.time))
    }

    pub fn peek(&mut self) -> Option<&Event> {
        let limit = self.limit();
        let dep = self.departures.peek(limit);
        match (&self.arrival, dep) {
            (Some(a), Some(d)) => Some(if before(a, d) { a } else { d }),
            (Some(a), None) => Some(a),
            (None, d) => d,
        }
    }

    pub fn pop(&mut self) -> Option<Event> {
        let limit = self.limit();
        let take_arrival = match (&self.arrival, self.departures.peek(limit)) {
            (Some(a), Some(d)) => before(a, d),
            (Some(_), None) => true,
            (None, _) => false,
        };
        if take_arrival {
            self.arrival.take()
        } else {
            self.departures.pop(u64::MAX)
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Event> {
        self.arrival.iter().chain(
            self.departures
                .buckets
                .iter()
                .flatten()
                .chain(self.departures.overflow.iter()),
        )
    }
}

#[inline]
fn before(a: &Event, b: &Event) -> bool {
    a.time.total_cmp(&b.time).then(a.seq.cmp(&b.seq)).is_lt()
}

#[derive(Debug, Clone)]
struct Calendar {
    inv_width: f64,
    buckets: Vec<Vec<Event>>,
    mask: u64,
    // absolute index of the current bucket; every bucket before it is empty
    cur: u64,
    // current bucket is sorted descending so the earliest event is last
    sorted: bool,
    overflow: BinaryHeap<Event>,
    len: usize,
}

impl Calendar {
    fn new(width: f64, horizon: f64) -> Self {
        let width = if width.is_finite() && width > 0.0 { width } else { 1.0 };
        let ring = ((horizon / width).ceil() as usize).clamp(64, 1 << 22).next_power_of_two();
        Calendar {
            inv_width: 1.0 / width,
            buckets: vec![Vec::new(); ring],
            mask: ring as u64 - 1,
            cur: 0,
            sorted: false,
            overflow: BinaryHeap::new(),
            len: 0,
        }
    }

    #[inline]
    fn bucket_of(&self, t: f64) -> u64 {
        (t * self.inv_width) as u64
    }

    fn push(&mut self, ev: Event) {
        self.len += 1;
        let b = self.bucket_of(ev.time).max(self.cur);
        if b > self.cur + self.mask {
            self.overflow.push(ev);
        } else if b == self.cur && self.sorted {
            let bucket = &mut self.buckets[(b & self.mask) as usize];
            let pos = bucket.partition_point(|x| before(&ev, x));
            bucket.insert(pos, ev);
        } else {
            self.buckets[(b & self.mask) as usize].push(ev);
        }
    }

    /// Moves `cur` to the first nonempty bucket, but not past `limit`, and
    /// sorts it.
    fn settle(&mut self, limit: u64) -> bool {
        if self.len == 0 {
            return false;
        }
        loop {
            let idx = (self.cur & self.mask) as usize;
            if !self.buckets[idx].is_empty() {
                if !self.sorted {
                    self.buckets[idx].sort_unstable_by(|a, b| {
                        b.time.total_cmp(&a.time).then(b.seq.cmp(&a.seq))
                    });
                    self.sorted = true;
                }
                return true;
            }
            if self.cur >= limit {
                return false;
            }
            self.sorted = false;
            if self.len == self.overflow.len() {
                // ring is empty: jump straight to the earliest overflow event
                let t = self.overflow.peek().expect("len > 0").time;
                self.cur = self.bucket_of(t).min(limit).max(self.cur + 1);
            } else {
                self.cur += 1;
            }
            while let Some(top) = self.overflow.peek() {
                let b = self.bucket_of(top.time).max(self.cur);
                if b > self.cur + self.mask {
                    break;
                }
                let ev = self.overflow.pop().expect("peeked");
                self.buckets[(b & self.mask) as usize].push(ev);
            }
        }
    }

    fn peek(&mut self, limit: u64) -> Option<&Event> {
        if !self.settle(limit) {
            return None;
        }
        self.buckets[(self.cur & self.mask) as usize].last()
    }

    fn pop(&mut self, limit: u64) -> Option<Event> {
        if !self.settle(limit) {
            return None;
        }
        self.len -= 1;
        self.buckets[(self.cur & self.mask) as usize].pop()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EventKind;
    use crate::model::CallId;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dep(time: f64, seq: u64) -> Event {
        Event { time, seq, kind: EventKind::Departure { call: CallId(seq) } }
    }

    #[test]
    fn pops_in_time_then_seq_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut q = EventQueue::new(0.05, 2.0);
        let mut reference = BinaryHeap::new();
        let mut seq = 0;
        let mut now = 0.0;
        let mut popped = Vec::new();
        let mut expected = Vec::new();
        for _ in 0..20_000 {
            if rng.random_bool(0.55) || reference.is_empty() {
                // mostly short delays, some far beyond the horizon, some ties
                let dt: f64 = match rng.random_range(0..10) {
                    0 => 50.0 * rng.random::<f64>(),
                    1 => 0.0,
                    _ => rng.random::<f64>(),
                };
                let ev = dep(now + dt, seq);
                seq += 1;
                q.push_departure(ev);
                reference.push(ev);
            } else {
                let a = q.pop().unwrap();
                let b = reference.pop().unwrap();
                now = a.time;
                popped.push(a);
                expected.push(b);
            }
            assert_eq!(q.len(), reference.len());
        }
        while let Some(b) = reference.pop() {
            expected.push(b);
            popped.push(q.pop().unwrap());
        }
        assert_eq!(popped, expected);
        assert!(q.pop().is_none());
    }

    #[test]
    fn arrival_slot_competes_with_departures() {
        let mut q = EventQueue::new(1.0, 10.0);
        q.push_departure(dep(2.0, 0));
        q.set_arrival(Event { time: 1.5, seq: 1, kind: EventKind::Departure { call: CallId(9) } });
        assert_eq!(q.peek().unwrap().seq, 1);
        assert_eq!(q.pop().unwrap().seq, 1);
        assert_eq!(q.pop().unwrap().seq, 0);
        assert!(q.peek().is_none());
    }

    #[test]
    fn sparse_far_events_jump() {
        let mut q = EventQueue::new(1e-3, 0.1);
        q.push_departure(dep(1e6, 0));
        q.push_departure(dep(5.0, 1));
        assert_eq!(q.pop().unwrap().seq, 1);
        assert_eq!(q.pop().unwrap().seq, 0);
    }

    #[test]
    fn cursor_stays_behind_pending_arrival() {
        let mut q = EventQueue::new(1.0, 4096.0);
        q.push_departure(dep(1000.0, 0));
        let mut seq = 1;
        for k in 0..500 {
            let t = k as f64 * 0.5;
            q.set_arrival(Event { time: t, seq, kind: EventKind::Departure { call: CallId(seq) } });
            seq += 1;
            while q.pop().unwrap().seq != seq - 1 {}
            q.push_departure(dep(t + 100.0, seq));
            seq += 1;
            // the cursor must not have jumped to the far departure
            assert!(q.departures.cur <= q.departures.bucket_of(t));
        }
        let mut last = 0.0;
        while let Some(ev) = q.pop() {
            assert!(ev.time >= last);
            last = ev.time;
        }
        assert_eq!(last, 1000.0);
    }

    #[test]
    fn push_behind_advanced_cursor() {
        let mut q = EventQueue::new(1.0, 64.0);
        q.push_departure(dep(30.0, 0));
        // peeking advances the cursor to bucket 30
        assert_eq!(q.peek().unwrap().time, 30.0);
        q.push_departure(dep(3.0, 1));
        assert_eq!(q.pop().unwrap().seq, 1);
        assert_eq!(q.pop().unwrap().seq, 0);
    }
}
