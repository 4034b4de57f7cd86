//! Live panoramic view: a pool snapshot augmented from storage, filtered,
//! sorted and summarised by charts.

pub mod charts;
pub mod query;

use std::cmp::Ordering;

use chrono::{Days, TimeDelta};
use serde::Serialize;

use crate::model::{
    DisplayClass, JobId, Load, MachineStatus, PoolSnapshot, QueueSummary, SlotActivity, SlotObservation, SlotState,
    Timestamp,
};
use crate::storage::{DataRoot, ReadMode, StorageError};

pub use charts::{compute_chart, ChartData, ChartId, ChartKind, ChartPoint};
pub use query::{Field, Order, PanoramicQuery, QueryError, Range, RangeField, Reachability, Section, SortKey};

/// Whether one slot satisfies every slot-level predicate of `q`.
pub fn slot_matches(slot: &SlotObservation, time_in_state_s: u64, q: &PanoramicQuery) -> bool {
    q.states.as_ref().is_none_or(|s| s.contains(&slot.state()))
        && q.owner.as_deref().is_none_or(|o| slot.owner() == Some(o))
        && q.time_in_state_s.contains(time_in_state_s)
}

/// Whether a machine passes every filter of `q`.
pub fn machine_matches(m: &MachineStatus, q: &PanoramicQuery) -> bool {
    let info = &m.info;
    let a = &info.attributes;
    let reach_ok = match q.reachable {
        Reachability::Up => info.reachable,
        Reachability::Down => !info.reachable,
        Reachability::Any => true,
    };
    if !reach_ok {
        return false;
    }
    let needs_attributes = q.os.is_some() || q.os_version.is_some() || q.has_attribute_ranges();
    if needs_attributes && !info.reachable {
        return false;
    }
    let attrs_ok = q.os.as_deref().is_none_or(|os| a.os_name == os)
        && q.os_version.as_deref().is_none_or(|v| a.os_version.starts_with(v))
        && q.memory_mb.contains(a.memory_mb_total)
        && q.disk_mb_free.contains(a.disk_mb_free_total)
        && q.load_avg_total.contains(a.load_avg_total)
        && q.load_avg_condor.contains(a.load_avg_condor)
        && q.slot_count.contains(a.slot_count);
    if !attrs_ok {
        return false;
    }
    !q.has_slot_predicates()
        || m
            .slots
            .iter()
            .zip(&m.time_in_state_s)
            .any(|(s, t)| slot_matches(s, *t, q))
}

fn compare(a: &MachineStatus, b: &MachineStatus, key: SortKey) -> Ordering {
    let (x, y) = (&a.info, &b.info);
    match key {
        SortKey::Name => Ordering::Equal,
        SortKey::Load => x.attributes.load_avg_total.cmp(&y.attributes.load_avg_total),
        SortKey::FreeDisk => x.attributes.disk_mb_free_total.cmp(&y.attributes.disk_mb_free_total),
        SortKey::Memory => x.attributes.memory_mb_total.cmp(&y.attributes.memory_mb_total),
        SortKey::SlotCount => x.attributes.slot_count.cmp(&y.attributes.slot_count),
        SortKey::LastJobTime => x.last_job_time.cmp(&y.last_job_time),
    }
}

/// Sorts by `key` in `order`; ties break by ascending name.
pub fn sort_machines(machines: &mut [&MachineStatus], key: SortKey, order: Order) {
    machines.sort_by(|a, b| {
        let primary = if key == SortKey::Name {
            a.info.machine.cmp(&b.info.machine)
        } else {
            compare(a, b, key)
        };
        let primary = if order == Order::Desc { primary.reverse() } else { primary };
        primary.then_with(|| a.info.machine.cmp(&b.info.machine))
    });
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotView {
    pub slot: u32,
    pub state: SlotState,
    pub activity: SlotActivity,
    pub display_class: DisplayClass,
    pub job_id: Option<JobId>,
    pub owner: Option<String>,
    pub load_avg: Load,
    pub time_in_state_s: u64,
    /// Whether this slot satisfies the slot-level filters.
    pub matches: bool,
}

/// One machine row with the requested optional columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MachineView {
    pub name: String,
    pub reachable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slot_count: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disk_mb_free_total: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disk_mb_free_per_slot: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory_mb_total: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory_mb_per_slot: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub os_name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub os_version: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub load_avg_total: Option<Load>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub load_avg_condor: Option<Load>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restriction: Option<Option<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub last_job_time: Option<Option<Timestamp>>,
    pub disk_alert: bool,
    pub slots: Vec<SlotView>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ViewCounts {
    pub machines_shown: usize,
    pub machines_total: usize,
    pub slots_shown: u64,
    pub slots_total: u64,
    /// Slots of shown machines that satisfy the slot-level filters.
    pub slots_matching: u64,
    pub disk_alerts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanoramicView {
    pub taken_at: Timestamp,
    pub counts: ViewCounts,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub machines: Option<Vec<MachineView>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub queue: Option<QueueSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub charts: Option<Vec<ChartData>>,
    pub refresh_s: u32,
}

fn disk_alert(m: &MachineStatus, q: &PanoramicQuery) -> bool {
    m.info.reachable && q.disk_alert_mb.is_some_and(|limit| m.info.attributes.disk_mb_free_total < limit)
}

fn machine_view(m: &MachineStatus, q: &PanoramicQuery) -> MachineView {
    let a = &m.info.attributes;
    let has = |f: Field| q.fields.contains(&f);
    let pick = |f: Field, v: u64| has(f).then_some(v);
    let slot_filter = q.has_slot_predicates();
    MachineView {
        name: m.info.machine.clone(),
        reachable: m.info.reachable,
        slot_count: has(Field::Slots).then_some(a.slot_count),
        disk_mb_free_total: pick(Field::DiskTotal, a.disk_mb_free_total),
        disk_mb_free_per_slot: has(Field::DiskPerSlot).then(|| a.disk_mb_free_per_slot.clone()),
        memory_mb_total: pick(Field::MemoryTotal, a.memory_mb_total),
        memory_mb_per_slot: has(Field::MemoryPerSlot).then(|| a.memory_mb_per_slot.clone()),
        os_name: has(Field::Os).then(|| a.os_name.clone()),
        os_version: has(Field::Os).then(|| a.os_version.clone()),
        load_avg_total: has(Field::LoadTotal).then_some(a.load_avg_total),
        load_avg_condor: has(Field::LoadCondor).then_some(a.load_avg_condor),
        restriction: has(Field::Restriction).then(|| m.info.restriction.as_ref().map(|r| r.to_string())),
        last_job_time: has(Field::LastJobTime).then_some(m.info.last_job_time),
        disk_alert: disk_alert(m, q),
        slots: m
            .slots
            .iter()
            .zip(&m.time_in_state_s)
            .map(|(s, &t)| SlotView {
                slot: s.slot(),
                state: s.state(),
                activity: s.activity(),
                display_class: s.display_class(),
                job_id: s.job_id().cloned(),
                owner: s.owner().map(str::to_string),
                load_avg: s.load(),
                time_in_state_s: t,
                matches: !slot_filter || slot_matches(s, t, q),
            })
            .collect(),
    }
}

/// Applies `q` to an augmented snapshot.
pub fn build_view(snapshot: &PoolSnapshot, q: &PanoramicQuery) -> PanoramicView {
    let mut shown: Vec<&MachineStatus> = snapshot.machines.iter().filter(|m| machine_matches(m, q)).collect();
    sort_machines(&mut shown, q.sort, q.order);
    let views: Vec<MachineView> = shown.iter().map(|m| machine_view(m, q)).collect();
    let slot_total = |ms: &mut dyn Iterator<Item = &MachineStatus>| -> u64 {
        ms.map(|m| u64::from(m.info.attributes.slot_count)).sum()
    };
    let counts = ViewCounts {
        machines_shown: shown.len(),
        machines_total: snapshot.machines.len(),
        slots_shown: slot_total(&mut shown.iter().copied()),
        slots_total: slot_total(&mut snapshot.machines.iter()),
        slots_matching: views
            .iter()
            .map(|v| v.slots.iter().filter(|s| s.matches).count() as u64)
            .sum(),
        disk_alerts: views.iter().filter(|v| v.disk_alert).count(),
    };
    let charts = q.show.contains(&Section::Charts).then(|| {
        q.charts
            .iter()
            .map(|&id| compute_chart(id, &shown, snapshot.taken_at))
            .collect()
    });
    PanoramicView {
        taken_at: snapshot.taken_at,
        counts,
        machines: q.show.contains(&Section::Machines).then_some(views),
        queue: q.show.contains(&Section::Queue).then(|| snapshot.queue.clone()),
        charts,
        refresh_s: q.refresh_s,
    }
}

type SlotKey<'a> = (SlotState, SlotActivity, Option<&'a JobId>, Option<&'a str>);

fn key(o: &SlotObservation) -> SlotKey<'_> {
    (o.state(), o.activity(), o.job_id(), o.owner())
}

/// Seconds each live slot has held its current state, from stored history:
/// the run of identical stored observations (same state, activity and job)
/// ending at the newest stored tick, each step at most `gap_limit_s` apart
/// and the newest within `gap_limit_s` of `taken_at`. Zero when the newest
/// stored observation differs from the live one.
pub fn time_in_state(
    root: &DataRoot,
    machine: &str,
    live: &[SlotObservation],
    taken_at: Timestamp,
    gap_limit_s: u32,
    lookback_days: u32,
) -> Result<Vec<u64>, StorageError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Run {
        Unseen,
        Open(Timestamp),
        Closed(Option<Timestamp>),
    }
    let gap = TimeDelta::seconds(i64::from(gap_limit_s));
    let mut runs = vec![Run::Unseen; live.len()];
    let today = taken_at.date_naive();
    for back in 0..lookback_days.max(1) {
        let Some(date) = today.checked_sub_days(Days::new(u64::from(back))) else {
            break;
        };
        let (obs, _) = root.read_machine_day(machine, date, ReadMode::Lenient)?;
        for o in obs.iter().rev().filter(|o| o.timestamp() <= taken_at) {
            let Some(i) = live.iter().position(|l| l.slot() == o.slot()) else {
                continue;
            };
            let t = o.timestamp();
            runs[i] = match runs[i] {
                Run::Closed(e) => Run::Closed(e),
                Run::Unseen if key(o) != key(&live[i]) || taken_at - t > gap => Run::Closed(None),
                Run::Unseen => Run::Open(t),
                Run::Open(e) if key(o) != key(&live[i]) || e - t > gap => Run::Closed(Some(e)),
                Run::Open(e) => Run::Open(e.min(t)),
            };
        }
        // Observations from earlier days cannot continue a run whose oldest
        // point is already more than the gap limit past this day's start.
        let day_start = crate::timeline::day_start(date);
        for r in runs.iter_mut() {
            *r = match *r {
                Run::Unseen if taken_at - day_start > gap => Run::Closed(None),
                Run::Open(e) if e - day_start > gap => Run::Closed(Some(e)),
                other => other,
            };
        }
        if runs.iter().all(|r| matches!(r, Run::Closed(_))) {
            break;
        }
    }
    Ok(runs
        .into_iter()
        .map(|r| match r {
            Run::Open(e) | Run::Closed(Some(e)) => (taken_at - e).num_seconds().max(0) as u64,
            _ => 0,
        })
        .collect())
}

/// Fills in `last_job_time` and `time_in_state_s` of every machine from the
/// stored history.
pub fn augment_snapshot(
    snapshot: &mut PoolSnapshot,
    root: &DataRoot,
    gap_limit_s: u32,
    lookback_days: u32,
) -> Result<(), StorageError> {
    let taken_at = snapshot.taken_at;
    for m in &mut snapshot.machines {
        m.info.last_job_time = root.last_job_time(&m.info.machine, taken_at, lookback_days, ReadMode::Lenient)?;
        m.time_in_state_s = time_in_state(root, &m.info.machine, &m.slots, taken_at, gap_limit_s, lookback_days)?;
    }
    Ok(())
}
