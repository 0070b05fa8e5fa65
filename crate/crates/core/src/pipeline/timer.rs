use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crate::model::{Clock, RawInput, Source};

use super::PipelineError;

/// Emits a `timer` raw input at every interval boundary until stopped.
#[derive(Debug, Clone, Copy)]
pub struct TimerSource {
    interval: Duration,
}

impl TimerSource {
    pub fn new(interval: Duration) -> Result<Self, PipelineError> {
        if interval.is_zero() {
            return Err(PipelineError::ZeroInterval);
        }
        Ok(Self { interval })
    }

    pub fn interval(&self) -> Duration {
        self.interval
    }

    /// Starts the ticking thread. Ticks are scheduled against the start
    /// instant so they do not drift.
    pub fn start(self, clock: Arc<Clock>) -> TimerStream {
        let (tick_tx, tick_rx) = mpsc::channel();
        let (stop_tx, stop_rx) = mpsc::channel::<()>();
        let interval = self.interval;
        let handle = thread::spawn(move || run(interval, clock, tick_tx, stop_rx));
        TimerStream {
            ticks: tick_rx,
            stop: Some(stop_tx),
            handle: Some(handle),
        }
    }
}

fn run(interval: Duration, clock: Arc<Clock>, ticks: Sender<RawInput>, stop: Receiver<()>) {
    let start = Instant::now();
    let mut n: u32 = 1;
    loop {
        let deadline = start + interval * n;
        let wait = deadline.saturating_duration_since(Instant::now());
        match stop.recv_timeout(wait) {
            Err(RecvTimeoutError::Timeout) => {}
            _ => return,
        }
        let input = RawInput {
            source: Source::Timer,
            payload: format!("timer tick {n}"),
            received_at: clock.now(),
        };
        if ticks.send(input).is_err() {
            return;
        }
        n += 1;
    }
}

/// Receiving end of a running timer. Iteration blocks for the next tick and
/// ends once the timer is stopped.
#[derive(Debug)]
pub struct TimerStream {
    ticks: Receiver<RawInput>,
    stop: Option<Sender<()>>,
    handle: Option<JoinHandle<()>>,
}

impl TimerStream {
    /// Ticks already emitted, without blocking.
    pub fn drain(&self) -> Vec<RawInput> {
        self.ticks.try_iter().collect()
    }

    /// Blocks up to `timeout` for the next tick.
    pub fn wait(&self, timeout: Duration) -> Option<RawInput> {
        self.ticks.recv_timeout(timeout).ok()
    }

    /// Stops the thread; ticks emitted before the call remain readable.
    pub fn stop(&mut self) {
        self.stop.take();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Iterator for TimerStream {
    type Item = RawInput;

    fn next(&mut self) -> Option<RawInput> {
        self.ticks.recv().ok()
    }
}

impl Drop for TimerStream {
    fn drop(&mut self) {
        self.stop();
    }
}
