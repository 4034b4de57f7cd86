#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{HeaderMap, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use tower::ServiceExt;

use poolgaze_core::clock::SimClock;
use poolgaze_core::source::StatusSource;
use poolgaze_server::{router, ServerConfig};

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body)
            .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    get_with(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

pub async fn get_with(app: &Router, req: Request<Body>) -> Reply {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, body }
}

pub fn app(root: &std::path::Path, source: Arc<dyn StatusSource>, clock: Arc<SimClock>, ttl_s: u64) -> Router {
    let mut config = ServerConfig::new(root);
    config.cache_ttl_s = ttl_s;
    router(config, source, clock).unwrap()
}

/// An `M` line plus one `S` line per slot state; `Claimed` slots run a job
/// of `owner`.
pub fn machine_lines(name: &str, disk_mb: u64, states: &[(&str, &str, Option<&str>)]) -> String {
    let n = states.len();
    let per = |v: u64| vec![(v / n as u64).to_string(); n].join(",");
    let mut out = format!(
        "M|2014-06-02T00:00:00Z|{name}|{n}|Linux|3.14|{}|{}|{disk_mb}|{}|0.50|0.00\n",
        4096,
        per(4096),
        per(disk_mb)
    );
    for (i, (state, activity, owner)) in states.iter().enumerate() {
        let (job, owner) = match owner {
            Some(o) => (format!("{}.0", i + 1), o.to_string()),
            None => (String::new(), String::new()),
        };
        out.push_str(&format!(
            "S|2014-06-02T00:00:00Z|{name}|{}|{state}|{activity}|0.00|{job}|{owner}\n",
            i + 1
        ));
    }
    out
}
