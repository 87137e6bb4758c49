//! Deterministic discrete-event engine.
//!
//! Time is fixed-point microseconds. Events are ordered by `(time, sequence)`
//! where `sequence` is a monotone counter assigned at scheduling, so events
//! scheduled for the same instant run in insertion order.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::SimError;

/// Simulated time in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000)
    }

    /// Rounds to the nearest microsecond. Negative and NaN inputs clamp to zero.
    pub fn from_secs_f64(s: f64) -> Self {
        if s.is_nan() || s <= 0.0 {
            return SimTime::ZERO;
        }
        let us = (s * 1e6).round();
        if us >= u64::MAX as f64 {
            SimTime::MAX
        } else {
            SimTime(us as u64)
        }
    }

    pub fn from_millis_f64(ms: f64) -> Self {
        Self::from_secs_f64(ms / 1e3)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / 1e3
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_add(rhs.0))
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        *self = *self + rhs;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}s", self.0 / 1_000_000, self.0 % 1_000_000)
    }
}

/// A scheduled event: payload plus its position in the total order.
#[derive(Debug, Clone)]
pub struct SimEvent<K> {
    pub time: SimTime,
    pub sequence: u64,
    pub kind: K,
}

impl<K> PartialEq for SimEvent<K> {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.sequence == other.sequence
    }
}

impl<K> Eq for SimEvent<K> {}

impl<K> PartialOrd for SimEvent<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<K> Ord for SimEvent<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.sequence).cmp(&(other.time, other.sequence))
    }
}

/// Min-queue over `(time, sequence)`.
#[derive(Debug)]
pub struct EventQueue<K> {
    heap: BinaryHeap<Reverse<SimEvent<K>>>,
    next_sequence: u64,
}

impl<K> Default for EventQueue<K> {
    fn default() -> Self {
        Self { heap: BinaryHeap::new(), next_sequence: 0 }
    }
}

impl<K> EventQueue<K> {
    pub fn push(&mut self, time: SimTime, kind: K) -> u64 {
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(Reverse(SimEvent { time, sequence, kind }));
        sequence
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|Reverse(e)| e.time)
    }

    pub fn pop(&mut self) -> Option<SimEvent<K>> {
        self.heap.pop().map(|Reverse(e)| e)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Counters accumulated over a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SimulationReport {
    pub end: SimTime,
    pub events_processed: u64,
    pub packets_delivered: u64,
    pub packets_dropped: u64,
}

/// Receives events popped by [`Engine::run_until`].
pub trait Handler<K> {
    type Error: fmt::Display;

    fn handle(&mut self, engine: &mut Engine<K>, event: SimEvent<K>) -> Result<(), Self::Error>;
}

/// Virtual clock plus pending-event queue.
#[derive(Debug)]
pub struct Engine<K> {
    now: SimTime,
    queue: EventQueue<K>,
    report: SimulationReport,
}

impl<K> Default for Engine<K> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K: fmt::Debug + Clone> Engine<K> {
    /// Processes every event with `time <= end` in order, then sets the clock to `end`.
    ///
    /// A handler error aborts the run; the error carries the offending event.
    pub fn run_until<H: Handler<K>>(&mut self, end: SimTime, handler: &mut H) -> Result<SimulationReport, SimError> {
        while let Some(t) = self.queue.peek_time() {
            if t > end {
                break;
            }
            let event = self.queue.pop().expect("peeked");
            debug_assert!(event.time >= self.now);
            self.now = event.time;
            self.report.events_processed += 1;
            let (kind, time) = (event.kind.clone(), event.time);
            handler
                .handle(self, event)
                .map_err(|e| SimError::Handler { context: format!("{kind:?} at {time}"), message: e.to_string() })?;
        }
        if end > self.now {
            self.now = end;
        }
        self.report.end = self.now;
        Ok(self.report)
    }
}

impl<K> Engine<K> {
    pub fn new() -> Self {
        Self { now: SimTime::ZERO, queue: EventQueue::default(), report: SimulationReport::default() }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Enqueues `kind` at absolute time `at`. Scheduling into the past is a logic error.
    pub fn schedule(&mut self, at: SimTime, kind: K) -> Result<u64, SimError> {
        if at < self.now {
            return Err(SimError::ScheduleInPast { at, now: self.now });
        }
        Ok(self.queue.push(at, kind))
    }

    pub fn schedule_in(&mut self, delay: SimTime, kind: K) -> u64 {
        self.queue.push(self.now + delay, kind)
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn note_delivered(&mut self) {
        self.report.packets_delivered += 1;
    }

    pub fn note_dropped(&mut self) {
        self.report.packets_dropped += 1;
    }

    pub fn report(&self) -> SimulationReport {
        SimulationReport { end: self.now, ..self.report }
    }
}

/// Random stream derived from a master seed and a stable label.
///
/// Streams are independent of creation order: adding a consumer never
/// perturbs the draws of another.
#[derive(Debug, Clone)]
pub struct RngStream {
    label: String,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, label: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update(label.as_bytes());
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        Self { label: label.to_owned(), rng: ChaCha12Rng::from_seed(key) }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn rng(&mut self) -> &mut ChaCha12Rng {
        &mut self.rng
    }
}

/// Derives a child seed for an independent run (e.g. one sweep point).
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(b"/seed/");
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
