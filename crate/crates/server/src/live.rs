//! Short-lived cache of the live status source with single-flight refresh:
//! at most one fetch is in progress and concurrent requests share its result.

use std::sync::Arc;

use chrono::TimeDelta;
use tokio::sync::Mutex;

use poolgaze_core::model::Timestamp;
use poolgaze_core::source::{SourceError, StatusSource};

/// Status and queue text fetched at one instant. Either may have failed.
#[derive(Debug)]
pub struct LiveFetch {
    pub taken_at: Timestamp,
    pub status: Result<String, SourceError>,
    pub queue: Result<String, SourceError>,
}

pub struct LiveCache {
    source: Arc<dyn StatusSource>,
    ttl: TimeDelta,
    current: Mutex<Option<Arc<LiveFetch>>>,
}

impl LiveCache {
    /// A `ttl_s` of zero fetches on every request.
    pub fn new(source: Arc<dyn StatusSource>, ttl_s: u64) -> Self {
        LiveCache {
            source,
            ttl: TimeDelta::seconds(i64::try_from(ttl_s).unwrap_or(i64::MAX / 1000)),
            current: Mutex::new(None),
        }
    }

    /// The cached fetch if it is younger than the TTL at `now`, otherwise a
    /// fresh one taken at `now`.
    pub async fn get(&self, now: Timestamp) -> Arc<LiveFetch> {
        let mut current = self.current.lock().await;
        if let Some(f) = current.as_ref() {
            let age = now - f.taken_at;
            if age >= TimeDelta::zero() && age < self.ttl {
                return f.clone();
            }
        }
        let (s1, s2) = (self.source.clone(), self.source.clone());
        let status = tokio::task::spawn_blocking(move || s1.fetch_status(now));
        let queue = tokio::task::spawn_blocking(move || s2.fetch_queue(now));
        let (status, queue) = tokio::join!(status, queue);
        let joined = |r: Result<Result<String, SourceError>, tokio::task::JoinError>| {
            r.unwrap_or_else(|e| Err(SourceError(format!("fetch task failed: {e}"))))
        };
        let fresh = Arc::new(LiveFetch {
            taken_at: now,
            status: joined(status),
            queue: joined(queue),
        });
        *current = Some(fresh.clone());
        fresh
    }
}
