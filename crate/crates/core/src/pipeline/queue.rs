use std::collections::BTreeMap;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::Duration;

use crate::model::{Clock, Event, Timestamp};

pub const DEFAULT_CAPACITY: usize = 256;
pub const DEFAULT_TTL: Duration = Duration::from_secs(60);

/// Outcome of [`EventQueue::push`]. Admission never fails; when the queue was
/// full the event with the smallest `(wall_nanos, seq)` is evicted and
/// returned here (which may be the event just pushed).
#[derive(Debug, Clone, PartialEq)]
pub struct Admission {
    pub ts: Timestamp,
    pub evicted: Option<Event>,
}

/// Outcome of [`EventQueue::pop_latest`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Popped {
    pub event: Option<Event>,
    /// Events dropped because their age exceeded the TTL.
    pub expired: Vec<Event>,
}

/// Bounded buffer of events ordered by timestamp.
///
/// Many producers may push concurrently; one logical consumer pops the most
/// recent event per decision cycle.
#[derive(Debug)]
pub struct EventQueue {
    buffer: Mutex<BTreeMap<Timestamp, Event>>,
    ready: Condvar,
    clock: Arc<Clock>,
    capacity: usize,
    ttl_nanos: u64,
}

impl EventQueue {
    /// Panics if `capacity` is zero.
    pub fn new(clock: Arc<Clock>, capacity: usize, ttl: Duration) -> Self {
        assert!(capacity > 0, "queue capacity must be positive");
        Self {
            buffer: Mutex::new(BTreeMap::new()),
            ready: Condvar::new(),
            clock,
            capacity,
            ttl_nanos: ttl.as_nanos().min(u64::MAX as u128) as u64,
        }
    }

    pub fn with_defaults(clock: Arc<Clock>) -> Self {
        Self::new(clock, DEFAULT_CAPACITY, DEFAULT_TTL)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn ttl(&self) -> Duration {
        Duration::from_nanos(self.ttl_nanos)
    }

    fn lock(&self) -> MutexGuard<'_, BTreeMap<Timestamp, Event>> {
        self.buffer.lock().expect("event queue poisoned")
    }

    /// Admits `event` with a fresh sequence number, keeping its wall time.
    pub fn push(&self, mut event: Event) -> Admission {
        let mut buf = self.lock();
        event.ts.seq = self.clock.next_seq();
        let ts = event.ts;
        buf.insert(ts, event);
        let evicted = if buf.len() > self.capacity {
            buf.pop_first().map(|(_, e)| e)
        } else {
            None
        };
        drop(buf);
        self.ready.notify_one();
        Admission { ts, evicted }
    }

    /// Expires stale events, then removes and returns the newest live one.
    pub fn pop_latest(&self, now: Timestamp) -> Popped {
        let mut buf = self.lock();
        let expired = Self::expire_locked(&mut buf, now, self.ttl_nanos);
        let event = buf.pop_last().map(|(_, e)| e);
        Popped { event, expired }
    }

    /// Removes events whose age at `now` exceeds the TTL.
    pub fn expire(&self, now: Timestamp) -> Vec<Event> {
        Self::expire_locked(&mut self.lock(), now, self.ttl_nanos)
    }

    fn expire_locked(
        buf: &mut BTreeMap<Timestamp, Event>,
        now: Timestamp,
        ttl_nanos: u64,
    ) -> Vec<Event> {
        // age > ttl  <=>  wall < now - ttl
        let Some(cutoff) = now.wall_nanos.checked_sub(ttl_nanos) else {
            return Vec::new();
        };
        let live = buf.split_off(&Timestamp::new(cutoff, 0));
        std::mem::replace(buf, live).into_values().collect()
    }

    /// Live events in ascending timestamp order, without removing them.
    pub fn snapshot(&self) -> Vec<Event> {
        self.lock().values().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.lock().is_empty()
    }

    /// Blocks until the queue is non-empty or `timeout` elapses. Returns
    /// whether an event is available.
    pub fn wait_for_event(&self, timeout: Duration) -> bool {
        let buf = self.lock();
        let (buf, _) = self
            .ready
            .wait_timeout_while(buf, timeout, |b| b.is_empty())
            .expect("event queue poisoned");
        !buf.is_empty()
    }
}
