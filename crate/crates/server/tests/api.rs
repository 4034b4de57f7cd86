mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use chrono::{NaiveDate, TimeZone, Utc};

use common::{app, get, get_with, machine_lines};
use poolgaze_core::clock::SimClock;
use poolgaze_core::model::{MachineRegistry, RegistryEntry, Timestamp};
use poolgaze_core::sim::{emit_data_root, Scenario};
use poolgaze_core::source::{SimSource, StaticSource};
use poolgaze_core::storage::{DataRoot, ReadMode};
use poolgaze_core::timeline::{period_summary, stored_day_detail, ReconstructionParams, Span};

fn t0() -> Timestamp {
    Utc.with_ymd_and_hms(2014, 6, 2, 12, 0, 0).unwrap()
}

fn registry(names: &[(&str, u32)]) -> MachineRegistry {
    MachineRegistry::new(
        names
            .iter()
            .map(|(n, s)| RegistryEntry {
                machine: n.to_string(),
                slot_count: *s,
                restriction: None,
            })
            .collect(),
    )
    .unwrap()
}

struct Live {
    _dir: tempfile::TempDir,
    root: DataRoot,
    source: Arc<StaticSource>,
    clock: Arc<SimClock>,
}

fn live(listing: &str, reg: &[(&str, u32)]) -> Live {
    let dir = tempfile::tempdir().unwrap();
    let root = DataRoot::new(dir.path());
    root.save_registry(&registry(reg)).unwrap();
    Live {
        root,
        _dir: dir,
        source: Arc::new(StaticSource::new(listing)),
        clock: Arc::new(SimClock::new(t0())),
    }
}

impl Live {
    fn app(&self, ttl: u64) -> axum::Router {
        app(self.root.path(), self.source.clone(), self.clock.clone(), ttl)
    }
}

fn pool_listing() -> String {
    let mut s = machine_lines("alpha", 4000, &[("Claimed", "Busy", Some("alice")), ("Owner", "Idle", None)]);
    s += &machine_lines("beta", 9000, &[("Claimed", "Busy", Some("bob")), ("Unclaimed", "Idle", None)]);
    s += "Q|alice|1|4|0\nQ|bob|1|0|2\n";
    s
}

fn sim_root() -> (tempfile::TempDir, DataRoot) {
    let dir = tempfile::tempdir().unwrap();
    let root = DataRoot::new(dir.path());
    let scenario = Scenario {
        seed: 11,
        machines: 2,
        slots_per_machine: vec![2],
        duration_s: 3 * 86_400,
        job_rate_per_slot_hour: 0.5,
        mean_job_length_s: 5000.0,
        ..Scenario::default()
    };
    emit_data_root(&scenario, &root).unwrap();
    (dir, root)
}

#[tokio::test]
async fn machines_are_listed_sorted() {
    let l = live("", &[("gamma", 2), ("alpha", 1), ("beta", 8)]);
    let r = get(&l.app(0), "/api/machines").await;
    assert_eq!(r.status, StatusCode::OK);
    let names: Vec<String> = r.json().as_array().unwrap().iter().map(|e| e["machine"].as_str().unwrap().to_string()).collect();
    assert_eq!(names, ["alpha", "beta", "gamma"]);
}

#[tokio::test]
async fn empty_and_missing_registry() {
    let l = live("", &[]);
    let r = get(&l.app(0), "/api/machines").await;
    assert_eq!((r.status, r.json()), (StatusCode::OK, serde_json::json!([])));
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), Arc::new(StaticSource::new("")), Arc::new(SimClock::new(t0())), 0);
    let r = get(&app, "/api/machines").await;
    assert_eq!(r.status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(r.json()["error"], "registry_missing");
    assert!(r.json()["detail"].is_string());
}

#[tokio::test]
async fn empty_day_is_all_owner_idle() {
    let l = live("", &[("ws", 8)]);
    let r = get(&l.app(0), "/api/machines/ws/day/2014-06-02").await;
    assert_eq!(r.status, StatusCode::OK);
    let j = r.json();
    assert_eq!(j["theoretical_s"], 691_200);
    assert_eq!(j["owner_idle_pct"], 100.0);
    assert_eq!(j["table"][0]["label"], "theoretical");
}

#[tokio::test]
async fn day_errors() {
    let l = live("", &[("ws", 1)]);
    let app = l.app(0);
    for (uri, status, code) in [
        ("/api/machines/ws/day/2014-13-01", StatusCode::BAD_REQUEST, "invalid_date"),
        ("/api/machines/ws/day/2014-6-1", StatusCode::BAD_REQUEST, "invalid_date"),
        ("/api/machines/nope/day/2014-06-01", StatusCode::NOT_FOUND, "unknown_machine"),
        ("/api/machines/ws/day/2014-06-01?view=gantt", StatusCode::BAD_REQUEST, "invalid_query"),
        ("/api/machines/ws/period/2014-06-01?span=year", StatusCode::BAD_REQUEST, "invalid_query"),
        ("/api/machines/nope/period/2014-06-01", StatusCode::NOT_FOUND, "unknown_machine"),
        ("/api/nothing", StatusCode::NOT_FOUND, "not_found"),
    ] {
        let r = get(&app, uri).await;
        assert_eq!(r.status, status, "{uri}");
        assert_eq!(r.json()["error"], code, "{uri}");
    }
}

#[tokio::test]
async fn detail_matches_direct_module_call() {
    let (_d, root) = sim_root();
    let app = app(root.path(), Arc::new(StaticSource::new("")), Arc::new(SimClock::new(t0())), 0);
    let date = NaiveDate::from_ymd_opt(2014, 6, 3).unwrap();
    let direct = stored_day_detail(
        &root,
        "node001",
        2,
        date,
        ReconstructionParams::with_interval(300).unwrap(),
        ReadMode::Lenient,
    )
    .unwrap();
    let r = get(&app, "/api/machines/node001/day/2014-06-03?view=detail").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.body, serde_json::to_vec(&direct).unwrap());
    assert!(!direct.intervals.is_empty());
}

#[tokio::test]
async fn periods_match_aggregator_and_sum_days() {
    let (_d, root) = sim_root();
    let app = app(root.path(), Arc::new(StaticSource::new("")), Arc::new(SimClock::new(t0())), 0);
    let r = get(&app, "/api/machines/node002/period/2014-06-01?span=week").await;
    let j = r.json();
    let days = j["per_day"].as_array().unwrap();
    assert_eq!(days.len(), 7);
    for key in ["running_s", "suspended_s", "owner_idle_s", "theoretical_s"] {
        let sum: u64 = days.iter().map(|d| d[key].as_u64().unwrap()).sum();
        assert_eq!(j["totals"][key].as_u64().unwrap(), sum, "{key}");
    }
    let direct = period_summary(
        &root,
        "node002",
        2,
        NaiveDate::from_ymd_opt(2014, 6, 1).unwrap(),
        Span::Week,
        ReconstructionParams::with_interval(300).unwrap(),
        ReadMode::Lenient,
    )
    .unwrap();
    assert_eq!(r.body, serde_json::to_vec(&direct).unwrap());
    let r = get(&app, "/api/machines/node002/period/2014-06-05?span=month").await;
    assert_eq!(r.json()["per_day"].as_array().unwrap().len(), 30);
}

#[tokio::test]
async fn pool_status_without_filters_shows_everything() {
    let l = live(&pool_listing(), &[("alpha", 2), ("beta", 2), ("omega", 4)]);
    let j = get(&l.app(0), "/api/pool/status").await.json();
    let c = &j["counts"];
    assert_eq!(c["machines_shown"], c["machines_total"]);
    assert_eq!(c["machines_total"], 3);
    assert_eq!(c["slots_total"], 8);
    let down: Vec<bool> = j["machines"].as_array().unwrap().iter().map(|m| m["reachable"].as_bool().unwrap()).collect();
    assert_eq!(down, [true, true, false]);
    assert_eq!(j["queue"]["totals"]["idle"], 4);
}

#[tokio::test]
async fn pool_status_filters_and_alerts() {
    let l = live(&pool_listing(), &[("alpha", 2), ("beta", 2)]);
    let app = l.app(0);
    let j = get(&app, "/api/pool/status?state=Claimed&owner=alice").await.json();
    let names: Vec<&str> = j["machines"].as_array().unwrap().iter().map(|m| m["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["alpha"]);
    let j = get(&app, "/api/pool/status?disk_alert_mb=5000").await.json();
    let alerts: Vec<bool> = j["machines"].as_array().unwrap().iter().map(|m| m["disk_alert"].as_bool().unwrap()).collect();
    assert_eq!(alerts, [true, false]);
    let j = get(&app, "/api/pool/status?show=charts&charts=slots_by_state").await.json();
    assert!(j.get("machines").is_none());
    assert_eq!(j["charts"][0]["id"], "slots_by_state");
}

#[tokio::test]
async fn pool_status_rejects_bad_filters() {
    let l = live(&pool_listing(), &[("alpha", 2)]);
    let app = l.app(0);
    for q in ["colour=red", "memory_mb_min=9&memory_mb_max=1", "sort=size", "os=a&os=b"] {
        let r = get(&app, &format!("/api/pool/status?{q}")).await;
        assert_eq!(r.status, StatusCode::BAD_REQUEST, "{q}");
        assert_eq!(r.json()["error"], "invalid_filter", "{q}");
    }
}

#[tokio::test]
async fn source_down_gives_502_with_registry() {
    let l = live(&pool_listing(), &[("alpha", 2), ("beta", 2)]);
    l.source.set_down();
    let app = l.app(0);
    let r = get(&app, "/api/pool/status").await;
    assert_eq!(r.status, StatusCode::BAD_GATEWAY);
    let j = r.json();
    assert_eq!(j["error"], "source_unavailable");
    assert_eq!(j["registry"].as_array().unwrap().len(), 2);
    let r = get(&app, "/api/queue").await;
    assert_eq!(r.status, StatusCode::BAD_GATEWAY);
}

#[tokio::test]
async fn queue_rows_and_totals() {
    let l = live(&pool_listing(), &[]);
    let j = get(&l.app(0), "/api/queue").await.json();
    let rows = j["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for col in ["running", "idle", "held"] {
        let sum: u64 = rows.iter().map(|r| r[col].as_u64().unwrap()).sum();
        assert_eq!(j["totals"][col].as_u64().unwrap(), sum);
    }
}

#[tokio::test]
async fn cache_serves_within_ttl_and_single_flights() {
    let l = live(&pool_listing(), &[("alpha", 2), ("beta", 2)]);
    let app = l.app(5);
    get(&app, "/api/queue").await;
    get(&app, "/api/pool/status").await;
    assert_eq!(l.source.fetch_count(), 2, "one status and one queue fetch");
    l.clock.advance(5);
    get(&app, "/api/queue").await;
    assert_eq!(l.source.fetch_count(), 4);

    l.clock.advance(60);
    let handles: Vec<_> = (0..16)
        .map(|_| {
            let app = app.clone();
            tokio::spawn(async move { get(&app, "/api/pool/status").await.status })
        })
        .collect();
    for h in handles {
        assert_eq!(h.await.unwrap(), StatusCode::OK);
    }
    assert_eq!(l.source.fetch_count(), 6);

    let uncached = l.app(0);
    get(&uncached, "/api/queue").await;
    get(&uncached, "/api/queue").await;
    assert_eq!(l.source.fetch_count(), 10);
}

#[tokio::test]
async fn health_flags() {
    let (_d, root) = sim_root();
    let end = Utc.with_ymd_and_hms(2014, 6, 5, 0, 0, 0).unwrap();
    let clock = Arc::new(SimClock::new(end));
    let source = Arc::new(StaticSource::new(pool_listing()));
    let app = app(root.path(), source.clone(), clock.clone(), 0);
    let j = get(&app, "/api/health").await.json();
    assert_eq!(j["status"], "ok", "{j}");
    assert_eq!(j["last_poll_age_s"], 300);
    clock.advance(3600);
    let j = get(&app, "/api/health").await.json();
    assert_eq!((j["status"].as_str(), j["last_poll_ok"].as_bool()), (Some("degraded"), Some(false)));
    source.set_down();
    assert_eq!(get(&app, "/api/health").await.json()["source_ok"], false);

    let missing = common::app(&root.path().join("absent"), source, clock, 0);
    let r = get(&missing, "/api/health").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["data_root_ok"], false);
}

#[tokio::test]
async fn cors_headers_are_sent() {
    let l = live("", &[]);
    let req = Request::get("/api/machines")
        .header("origin", "http://dash.example")
        .body(Body::empty())
        .unwrap();
    let r = get_with(&l.app(0), req).await;
    assert_eq!(r.headers["access-control-allow-origin"], "*");
}

#[tokio::test]
async fn simulated_live_source_reports_time_in_state() {
    let (_d, root) = sim_root();
    let truth = Arc::new(poolgaze_core::sim::simulate(&Scenario {
        seed: 11,
        machines: 2,
        slots_per_machine: vec![2],
        duration_s: 3 * 86_400,
        job_rate_per_slot_hour: 0.5,
        mean_job_length_s: 5000.0,
        ..Scenario::default()
    })
    .unwrap());
    let clock = Arc::new(SimClock::new(Utc.with_ymd_and_hms(2014, 6, 3, 10, 0, 0).unwrap()));
    let app = app(root.path(), Arc::new(SimSource::new(truth)), clock, 0);
    let j = get(&app, "/api/pool/status").await.json();
    let machines = j["machines"].as_array().unwrap();
    assert_eq!(machines.len(), 2);
    for m in machines {
        for s in m["slots"].as_array().unwrap() {
            assert!(s["time_in_state_s"].as_u64().is_some());
        }
    }
}
