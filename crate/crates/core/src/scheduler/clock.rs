use std::fmt;
use std::sync::Mutex;
use std::time::Instant;

/// Monotonic time source in seconds.
pub trait Clock: Send + Sync + fmt::Debug {
    fn now(&self) -> f64;
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}

/// Manually advanced clock for deterministic timeout tests.
#[derive(Debug, Default)]
pub struct SimClock {
    t: Mutex<f64>,
}

impl SimClock {
    pub fn new() -> Self {
        Self::default()
    }

    /// Moves time forward; negative steps are ignored.
    pub fn advance(&self, dt: f64) {
        if dt > 0.0 {
            *self.t.lock().unwrap() += dt;
        }
    }
}

impl Clock for SimClock {
    fn now(&self) -> f64 {
        *self.t.lock().unwrap()
    }
}
