use std::time::Instant;

use bfdca_core::{Clock, NullClock};

use crate::config::ClockKind;

/// Seconds since construction.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

pub fn make_clock(kind: ClockKind) -> Box<dyn Clock + Sync> {
    match kind {
        ClockKind::Wall => Box::new(WallClock::new()),
        ClockKind::Null => Box::new(NullClock),
    }
}
