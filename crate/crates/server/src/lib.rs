//! HTTP API over a pool data root and a live status source.
//!
//! | route | payload |
//! |-------|---------|
//! | `GET /api/machines` | registry entries sorted by name |
//! | `GET /api/machines/{name}/day/{date}?view=summary\|detail` | daily table or per-slot detail |
//! | `GET /api/machines/{name}/period/{start}?span=week\|month` | period summary |
//! | `GET /api/pool/status?<panoramic query>` | live filtered view |
//! | `GET /api/queue` | live queue summary |
//! | `GET /api/health` | probe flags |
//!
//! Errors carry a `{error, detail}` body. Percentages are relative to the
//! theoretical time (slots × 24 h).

mod error;
mod live;

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, Method};
use axum::routing::get;
use axum::{Json, Router};
use chrono::NaiveDate;
use serde::Serialize;
use tower_http::cors::{AllowOrigin, CorsLayer};

use poolgaze_core::clock::Clock;
use poolgaze_core::collector::{DEFAULT_INTERVAL_S, DEFAULT_LOOKBACK_DAYS};
use poolgaze_core::model::{DailySummary, MachineRegistry, QueueSummary, RegistryEntry, SummaryRow, Timestamp};
use poolgaze_core::panoramic::{augment_snapshot, build_view, PanoramicQuery, PanoramicView, Section};
use poolgaze_core::record::{parse_queue_output, parse_status_output};
use poolgaze_core::source::StatusSource;
use poolgaze_core::storage::{DataRoot, ReadMode};
use poolgaze_core::timeline::{
    period_summary, stored_day_detail, stored_day_summary, ReconstructionParams, Span,
};

pub use error::ApiError;
pub use live::{LiveCache, LiveFetch};

pub const DEFAULT_CACHE_TTL_S: u64 = 5;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub data_root: PathBuf,
    /// Collector interval; sets reconstruction parameters and staleness.
    pub interval_s: u32,
    pub cache_ttl_s: u64,
    pub lookback_days: u32,
    /// Allowed CORS origin; any origin when unset.
    pub cors_origin: Option<String>,
}

impl ServerConfig {
    pub fn new(data_root: impl Into<PathBuf>) -> Self {
        ServerConfig {
            data_root: data_root.into(),
            interval_s: DEFAULT_INTERVAL_S,
            cache_ttl_s: DEFAULT_CACHE_TTL_S,
            lookback_days: DEFAULT_LOOKBACK_DAYS,
            cors_origin: None,
        }
    }
}

struct AppState {
    root: DataRoot,
    params: ReconstructionParams,
    lookback_days: u32,
    clock: Arc<dyn Clock>,
    live: LiveCache,
}

type Shared = Arc<AppState>;

/// Builds the router. Fails if the interval is not a valid sampling
/// interval.
pub fn router(
    config: ServerConfig,
    source: Arc<dyn StatusSource>,
    clock: Arc<dyn Clock>,
) -> Result<Router, String> {
    let params = ReconstructionParams::with_interval(config.interval_s).map_err(|e| e.to_string())?;
    let cors_origin = match &config.cors_origin {
        Some(o) => AllowOrigin::exact(HeaderValue::from_str(o).map_err(|e| format!("bad CORS origin: {e}"))?),
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new()
        .allow_origin(cors_origin)
        .allow_methods([Method::GET]);
    let state = Arc::new(AppState {
        root: DataRoot::new(&config.data_root),
        params,
        lookback_days: config.lookback_days,
        clock,
        live: LiveCache::new(source, config.cache_ttl_s),
    });
    Ok(Router::new()
        .route("/api/machines", get(machines))
        .route("/api/machines/{name}/day/{date}", get(machine_day))
        .route("/api/machines/{name}/period/{start}", get(machine_period))
        .route("/api/pool/status", get(pool_status))
        .route("/api/queue", get(queue))
        .route("/api/health", get(health))
        .fallback(|| async { ApiError::new(axum::http::StatusCode::NOT_FOUND, "not_found", "no such route") })
        .layer(cors)
        .with_state(state))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

type Pairs = Vec<(String, String)>;

fn query_pairs(q: Result<Query<Pairs>, QueryRejection>) -> Result<Pairs, ApiError> {
    q.map(|Query(p)| p)
        .map_err(|e| ApiError::bad_request("invalid_query", e.body_text()))
}

/// Accepts `allowed` keys at most once each.
fn single_params<'a>(pairs: &'a Pairs, allowed: &[&str]) -> Result<Vec<(&'a str, &'a str)>, ApiError> {
    let mut out: Vec<(&str, &str)> = Vec::new();
    for (k, v) in pairs {
        if !allowed.contains(&k.as_str()) {
            return Err(ApiError::bad_request("invalid_query", format!("unknown parameter {k:?}")));
        }
        if out.iter().any(|(seen, _)| seen == k) {
            return Err(ApiError::bad_request("invalid_query", format!("{k} given twice")));
        }
        out.push((k, v));
    }
    Ok(out)
}

fn parse_date(s: &str) -> Result<NaiveDate, ApiError> {
    let ok = s.len() == 10 && s.as_bytes()[4] == b'-' && s.as_bytes()[7] == b'-';
    ok.then(|| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok())
        .flatten()
        .ok_or_else(|| ApiError::bad_request("invalid_date", format!("{s:?} is not a YYYY-MM-DD date")))
}

fn registry_entry(root: &DataRoot, name: &str) -> Result<RegistryEntry, ApiError> {
    let registry = root.load_registry()?;
    registry
        .get(name)
        .cloned()
        .ok_or_else(|| ApiError::unknown_machine(name))
}

async fn machines(State(s): State<Shared>) -> Result<Json<MachineRegistry>, ApiError> {
    let st = s.clone();
    let mut registry = blocking(move || Ok(st.root.load_registry()?)).await?;
    let mut entries = registry.entries().to_vec();
    entries.sort_by(|a, b| a.machine.cmp(&b.machine));
    registry = MachineRegistry::new(entries).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(registry))
}

/// The daily figures plus the table rows in display order.
#[derive(Debug, Serialize)]
struct DaySummaryBody {
    #[serde(flatten)]
    summary: DailySummary,
    table: [SummaryRow; 5],
}

async fn machine_day(
    State(s): State<Shared>,
    Path((name, date)): Path<(String, String)>,
    q: Result<Query<Pairs>, QueryRejection>,
) -> Result<axum::response::Response, ApiError> {
    use axum::response::IntoResponse;
    let pairs = query_pairs(q)?;
    let params = single_params(&pairs, &["view"])?;
    let detail = match params.first().map(|(_, v)| *v) {
        None | Some("summary") => false,
        Some("detail") => true,
        Some(v) => return Err(ApiError::bad_request("invalid_query", format!("unknown view {v:?}"))),
    };
    let date = parse_date(&date)?;
    blocking(move || {
        let entry = registry_entry(&s.root, &name)?;
        Ok(if detail {
            Json(stored_day_detail(&s.root, &name, entry.slot_count, date, s.params, ReadMode::Lenient)?)
                .into_response()
        } else {
            let summary = stored_day_summary(&s.root, &name, entry.slot_count, date, s.params, ReadMode::Lenient)?;
            Json(DaySummaryBody {
                table: summary.table_rows(),
                summary,
            })
            .into_response()
        })
    })
    .await
}

async fn machine_period(
    State(s): State<Shared>,
    Path((name, start)): Path<(String, String)>,
    q: Result<Query<Pairs>, QueryRejection>,
) -> Result<axum::response::Response, ApiError> {
    use axum::response::IntoResponse;
    let pairs = query_pairs(q)?;
    let params = single_params(&pairs, &["span"])?;
    let span = match params.first().map(|(_, v)| *v) {
        None | Some("week") => Span::Week,
        Some("month") => Span::Month,
        Some(v) => return Err(ApiError::bad_request("invalid_query", format!("unknown span {v:?}"))),
    };
    let start = parse_date(&start)?;
    blocking(move || {
        let entry = registry_entry(&s.root, &name)?;
        let summary = period_summary(&s.root, &name, entry.slot_count, start, span, s.params, ReadMode::Lenient)?;
        Ok(Json(summary).into_response())
    })
    .await
}

async fn pool_status(
    State(s): State<Shared>,
    q: Result<Query<Pairs>, QueryRejection>,
) -> Result<Json<PanoramicView>, ApiError> {
    let pairs = query_pairs(q)?;
    let query = PanoramicQuery::from_pairs(&pairs).map_err(|e| ApiError::bad_request("invalid_filter", e.0))?;
    let st = s.clone();
    let registry = blocking(move || Ok(st.root.load_registry_or_empty()?)).await?;
    let fetch = s.live.get(s.clock.now()).await;
    let status = fetch
        .status
        .as_ref()
        .map_err(|e| ApiError::source_unavailable(e.to_string(), Some(registry.clone())))?;
    let mut snapshot = parse_status_output(status, fetch.taken_at, &registry)
        .map_err(|e| ApiError::source_unavailable(format!("malformed status output: {e}"), Some(registry.clone())))?;
    if query.show.contains(&Section::Queue) {
        snapshot.queue = live_queue(&fetch).map_err(|mut e| {
            e.registry = Some(registry.clone());
            e
        })?;
    }
    let view = blocking(move || {
        let gap = s.params.gap_limit_s();
        augment_snapshot(&mut snapshot, &s.root, gap, s.lookback_days)?;
        Ok(build_view(&snapshot, &query))
    })
    .await?;
    Ok(Json(view))
}

fn live_queue(fetch: &LiveFetch) -> Result<QueueSummary, ApiError> {
    let text = fetch
        .queue
        .as_ref()
        .map_err(|e| ApiError::source_unavailable(e.to_string(), None))?;
    parse_queue_output(text).map_err(|e| ApiError::source_unavailable(format!("malformed queue output: {e}"), None))
}

async fn queue(State(s): State<Shared>) -> Result<Json<QueueSummary>, ApiError> {
    let fetch = s.live.get(s.clock.now()).await;
    Ok(Json(live_queue(&fetch)?))
}

#[derive(Debug, Serialize)]
pub struct Health {
    /// `ok` when every flag holds, `degraded` otherwise.
    pub status: &'static str,
    pub data_root_ok: bool,
    pub source_ok: bool,
    /// Seconds since the newest stored record, if any is found.
    pub last_poll_age_s: Option<i64>,
    /// Whether the newest record is at most three intervals old.
    pub last_poll_ok: bool,
}

async fn health(State(s): State<Shared>) -> Json<Health> {
    let now: Timestamp = s.clock.now();
    let fetch = s.live.get(now).await;
    let source_ok = fetch.status.is_ok() && fetch.queue.is_ok();
    let st = s.clone();
    let (data_root_ok, latest) = blocking(move || {
        let present = st.root.is_present();
        let latest = if present {
            st.root.latest_record_time(now, st.lookback_days).ok().flatten()
        } else {
            None
        };
        Ok((present, latest))
    })
    .await
    .unwrap_or((false, None));
    let last_poll_age_s = latest.map(|t| (now - t).num_seconds());
    let limit = 3 * i64::from(s.params.interval_s());
    let last_poll_ok = last_poll_age_s.is_some_and(|a| a <= limit);
    let status = if data_root_ok && source_ok && last_poll_ok {
        "ok"
    } else {
        "degraded"
    };
    Json(Health {
        status,
        data_root_ok,
        source_ok,
        last_poll_age_s,
        last_poll_ok,
    })
}
