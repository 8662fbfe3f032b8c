//! Wall-clock abstraction. The timing loops take a clock by trait so tests
//! can inject scripted readings and count exactly how often time is read.

use std::time::Instant;

/// Seconds since an arbitrary fixed origin, monotone non-decreasing.
pub trait Clock {
    fn now(&mut self) -> f64;
}

/// The real thing, backed by a monotonic `Instant`.
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock {
            origin: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&mut self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}

/// Replays a prepared sequence of readings. Panics when read past the end,
/// which is exactly what a test wants: the read discipline is part of the
/// timing contract.
pub struct ScriptedClock {
    readings: Vec<f64>,
    next: usize,
}

impl ScriptedClock {
    pub fn new(readings: Vec<f64>) -> Self {
        ScriptedClock { readings, next: 0 }
    }

    pub fn reads_taken(&self) -> usize {
        self.next
    }

    pub fn remaining(&self) -> usize {
        self.readings.len() - self.next
    }
}

impl Clock for ScriptedClock {
    fn now(&mut self) -> f64 {
        let v = *self
            .readings
            .get(self.next)
            .unwrap_or_else(|| panic!("scripted clock exhausted after {} reads", self.next));
        self.next += 1;
        v
    }
}

/// Advances by a fixed step on every read and remembers the read count.
/// Under a known read pattern this makes "who read the clock when"
/// checkable by arithmetic alone.
pub struct CountingClock {
    step: f64,
    reads: u64,
}

impl CountingClock {
    pub fn new(step: f64) -> Self {
        CountingClock { step, reads: 0 }
    }

    pub fn reads(&self) -> u64 {
        self.reads
    }
}

impl Clock for CountingClock {
    fn now(&mut self) -> f64 {
        let v = self.reads as f64 * self.step;
        self.reads += 1;
        v
    }
}
