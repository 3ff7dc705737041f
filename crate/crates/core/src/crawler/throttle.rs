use std::collections::HashMap;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

/// Serialises request start times per host so that consecutive starts to the
/// same host are at least `min_interval` apart. Distinct hosts never wait on
/// each other.
#[derive(Debug)]
pub struct HostThrottle {
    min_interval: Duration,
    next_slot: Mutex<HashMap<String, Instant>>,
}

impl HostThrottle {
    pub fn new(min_interval: Duration) -> Self {
        HostThrottle { min_interval, next_slot: Mutex::new(HashMap::new()) }
    }

    /// Blocks until this caller's slot for `host` and returns the slot instant.
    ///
    /// Slots are reserved under the lock, so concurrent callers for one host
    /// receive slots spaced by `min_interval` in reservation order.
    pub fn wait(&self, host: &str) -> Instant {
        let slot = {
            let mut slots = self.next_slot.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = match slots.get(host) {
                Some(&next) if next > now => next,
                _ => now,
            };
            slots.insert(host.to_string(), slot + self.min_interval);
            slot
        };
        let now = Instant::now();
        if slot > now {
            thread::sleep(slot - now);
        }
        slot
    }

    pub fn min_interval(&self) -> Duration {
        self.min_interval
    }
}
