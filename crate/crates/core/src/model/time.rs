use std::cmp::Ordering;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

/// Wall-clock reading paired with an admission sequence number.
///
/// Ordering is lexicographic on `(wall_nanos, seq)`. Two timestamps issued by
/// the same [`Clock`] never compare equal because `seq` is unique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct Timestamp {
    pub wall_nanos: u64,
    pub seq: u64,
}

impl Timestamp {
    pub fn new(wall_nanos: u64, seq: u64) -> Self {
        Self { wall_nanos, seq }
    }

    /// Nanoseconds elapsed from `earlier` to `self`, saturating at zero.
    pub fn nanos_since(&self, earlier: &Timestamp) -> u64 {
        self.wall_nanos.saturating_sub(earlier.wall_nanos)
    }
}

impl Ord for Timestamp {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.wall_nanos, self.seq).cmp(&(other.wall_nanos, other.seq))
    }
}

impl PartialOrd for Timestamp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.wall_nanos, self.seq)
    }
}

/// Source of wall-clock time.
pub trait WallClock: Send + Sync {
    fn wall_nanos(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl WallClock for SystemClock {
    fn wall_nanos(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0)
    }
}

/// Deterministic clock: every reading advances time by a fixed tick.
///
/// Used for scripted runs so transcripts are byte-identical across runs.
#[derive(Debug)]
pub struct VirtualClock {
    now: AtomicU64,
    tick: u64,
}

impl VirtualClock {
    pub fn new(start_nanos: u64, tick_nanos: u64) -> Self {
        Self {
            now: AtomicU64::new(start_nanos),
            tick: tick_nanos,
        }
    }

    /// Jump forward without producing a reading.
    pub fn advance(&self, nanos: u64) {
        self.now.fetch_add(nanos, AtomicOrdering::SeqCst);
    }
}

impl WallClock for VirtualClock {
    fn wall_nanos(&self) -> u64 {
        self.now.fetch_add(self.tick, AtomicOrdering::SeqCst)
    }
}

/// Runtime-wide time source. Hands out timestamps whose `seq` component is
/// strictly increasing across everything one runtime instance stamps.
pub struct Clock {
    wall: Arc<dyn WallClock>,
    seq: AtomicU64,
}

impl Clock {
    pub fn new(wall: Arc<dyn WallClock>) -> Self {
        Self {
            wall,
            seq: AtomicU64::new(0),
        }
    }

    pub fn system() -> Self {
        Self::new(Arc::new(SystemClock))
    }

    /// Virtual clock starting at zero with a 1ms tick.
    pub fn virtual_ms() -> Self {
        Self::new(Arc::new(VirtualClock::new(0, 1_000_000)))
    }

    pub fn now(&self) -> Timestamp {
        let wall_nanos = self.wall.wall_nanos();
        Timestamp {
            wall_nanos,
            seq: self.next_seq(),
        }
    }

    pub fn wall_nanos(&self) -> u64 {
        self.wall.wall_nanos()
    }

    pub fn next_seq(&self) -> u64 {
        self.seq.fetch_add(1, AtomicOrdering::SeqCst) + 1
    }
}

impl fmt::Debug for Clock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Clock")
            .field("seq", &self.seq.load(AtomicOrdering::SeqCst))
            .finish()
    }
}

/// Sequential identifier generator, e.g. `evt-1`, `evt-2`, ...
#[derive(Debug)]
pub struct IdGen {
    prefix: &'static str,
    next: AtomicU64,
}

impl IdGen {
    pub fn new(prefix: &'static str) -> Self {
        Self {
            prefix,
            next: AtomicU64::new(1),
        }
    }

    pub fn next_id(&self) -> String {
        let n = self.next.fetch_add(1, AtomicOrdering::SeqCst);
        format!("{}-{}", self.prefix, n)
    }
}
