//! Injectable time: the wall clock for deployment, a simulated clock for
//! tests and synthetic runs.

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration as StdDuration;

use chrono::{DurationRound, TimeDelta, Utc};

use crate::model::Timestamp;

/// Cooperative stop flag shared between a loop and whoever stops it.
#[derive(Debug, Clone, Default)]
pub struct StopSignal {
    inner: Arc<(Mutex<bool>, Condvar)>,
}

impl StopSignal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stop(&self) {
        let (flag, cv) = &*self.inner;
        *flag.lock().expect("stop flag poisoned") = true;
        cv.notify_all();
    }

    pub fn is_stopped(&self) -> bool {
        *self.inner.0.lock().expect("stop flag poisoned")
    }

    /// Blocks for up to `timeout`, returning early once stopped. Returns
    /// whether the signal is set.
    pub fn wait(&self, timeout: StdDuration) -> bool {
        let (flag, cv) = &*self.inner;
        let guard = flag.lock().expect("stop flag poisoned");
        let (guard, _) = cv
            .wait_timeout_while(guard, timeout, |stopped| !*stopped)
            .expect("stop flag poisoned");
        *guard
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;

    /// Waits until `t`. Returns false if `stop` was raised first.
    fn sleep_until(&self, t: Timestamp, stop: &StopSignal) -> bool;
}

/// Real UTC time, truncated to whole seconds.
#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Utc::now()
            .duration_trunc(TimeDelta::seconds(1))
            .expect("current time is representable")
    }

    fn sleep_until(&self, t: Timestamp, stop: &StopSignal) -> bool {
        loop {
            if stop.is_stopped() {
                return false;
            }
            let remaining = t - Utc::now();
            if remaining <= TimeDelta::zero() {
                return true;
            }
            // Short waits keep the reaction to a stop well under a second.
            let step = remaining.to_std().unwrap_or_default().min(StdDuration::from_millis(250));
            if stop.wait(step) {
                return false;
            }
        }
    }
}

/// Simulated time that jumps instantly to every requested instant. With an
/// end set, sleeping to or past the end raises the stop signal.
#[derive(Debug)]
pub struct SimClock {
    now: Mutex<Timestamp>,
    end: Option<Timestamp>,
}

impl SimClock {
    pub fn new(start: Timestamp) -> Self {
        SimClock {
            now: Mutex::new(start),
            end: None,
        }
    }

    pub fn until(start: Timestamp, end: Timestamp) -> Self {
        SimClock {
            now: Mutex::new(start),
            end: Some(end),
        }
    }

    pub fn set(&self, t: Timestamp) {
        *self.now.lock().expect("clock poisoned") = t;
    }

    pub fn advance(&self, secs: i64) {
        let mut now = self.now.lock().expect("clock poisoned");
        *now += TimeDelta::seconds(secs);
    }
}

impl Clock for SimClock {
    fn now(&self) -> Timestamp {
        *self.now.lock().expect("clock poisoned")
    }

    fn sleep_until(&self, t: Timestamp, stop: &StopSignal) -> bool {
        if stop.is_stopped() {
            return false;
        }
        if self.end.is_some_and(|end| t >= end) {
            stop.stop();
            return false;
        }
        let mut now = self.now.lock().expect("clock poisoned");
        *now = (*now).max(t);
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Instant;

    #[test]
    fn stop_wakes_a_sleeping_system_clock() {
        let stop = StopSignal::new();
        let s2 = stop.clone();
        let handle = std::thread::spawn(move || {
            std::thread::sleep(StdDuration::from_millis(100));
            s2.stop();
        });
        let began = Instant::now();
        let woke = SystemClock.sleep_until(Utc::now() + TimeDelta::seconds(30), &stop);
        handle.join().unwrap();
        assert!(!woke);
        assert!(began.elapsed() < StdDuration::from_secs(1));
    }

    #[test]
    fn sim_clock_jumps_and_ends() {
        let t0 = chrono::DateTime::from_timestamp(0, 0).unwrap();
        let clock = SimClock::until(t0, t0 + TimeDelta::seconds(600));
        let stop = StopSignal::new();
        assert!(clock.sleep_until(t0 + TimeDelta::seconds(300), &stop));
        assert_eq!(clock.now(), t0 + TimeDelta::seconds(300));
        assert!(!clock.sleep_until(t0 + TimeDelta::seconds(600), &stop));
        assert!(stop.is_stopped());
    }
}
