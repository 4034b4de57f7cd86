//! Deterministic synthetic pool.
//!
//! Each machine draws from its own ChaCha8 stream (`stream = index + 1`) of
//! the scenario seed; the queue backlog draws from stream 0. Per machine:
//!
//! * owner sessions arrive as a Poisson process and last an exponential
//!   time; slot 1 shows the `Owner` state while a session is on and it is
//!   free;
//! * on every slot, jobs arrive as a Poisson process while the slot is free,
//!   no owner session is on and the machine's restriction (if any) allows it;
//! * a session suspends the job on slot 1 and, with the scenario's
//!   probability, the job on any other slot until the session ends;
//! * a job finishes once it has accumulated its drawn running time.
//!
//! Job ids are `<n>.0`, numbered by start time across the pool.

mod rng;
mod scenario;

use std::fs;
use std::path::Path;
use std::sync::Arc;

use chrono::{FixedOffset, TimeDelta};
use serde::Serialize;

use crate::clock::{SimClock, StopSignal};
use crate::collector::{run_loop, PollReport};
use crate::model::{
    JobId, JobInterval, JobPhase, JobRef, Load, MachineAttributes, MachineRecord, MachineRegistry, QueueCounts,
    QueueRow, QueueSummary, RegistryEntry, ScheduleWindows, Segment, SlotActivity, SlotObservation, SlotState,
    Timestamp,
};
use crate::record::{render_machine, render_queue_output, render_slot};
use crate::source::SimSource;
use crate::storage::{DataRoot, StorageError, WriterLock};

pub use scenario::{InvalidScenario, Scenario, MAX_DURATION_S};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

const OPERATING_SYSTEMS: [(&str, &str); 4] = [
    ("Fedora", "20"),
    ("Fedora", "19"),
    ("Ubuntu", "14.04"),
    ("openSUSE", "13.1"),
];
const MEMORY_PER_SLOT_MB: [u64; 3] = [2048, 4096, 8192];

/// What a slot was doing during a span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind")]
pub enum SpanKind {
    Idle,
    Owner,
    Job { job_id: JobId, owner: String, phase: JobPhase },
}

impl SpanKind {
    /// The state, activity and job a status listing reports for this span.
    pub fn observed(&self) -> (SlotState, SlotActivity, Option<JobRef>) {
        match self {
            SpanKind::Idle => (SlotState::Unclaimed, SlotActivity::Idle, None),
            SpanKind::Owner => (SlotState::Owner, SlotActivity::Idle, None),
            SpanKind::Job { job_id, owner, phase } => {
                let activity = match phase {
                    JobPhase::Running => SlotActivity::Busy,
                    JobPhase::Suspended => SlotActivity::Suspended,
                };
                (
                    SlotState::Claimed,
                    activity,
                    Some(JobRef {
                        job_id: job_id.clone(),
                        owner: owner.clone(),
                    }),
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TruthSpan {
    pub start: Timestamp,
    pub end: Timestamp,
    #[serde(flatten)]
    pub kind: SpanKind,
}

/// Spans of one slot, tiling the simulated duration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotTruth {
    pub slot: u32,
    pub spans: Vec<TruthSpan>,
}

impl SlotTruth {
    /// Span in effect at `t`; the end instant maps to the last span.
    pub fn span_at(&self, t: Timestamp) -> &TruthSpan {
        let i = self.spans.partition_point(|s| s.end <= t);
        &self.spans[i.min(self.spans.len() - 1)]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MachineTruth {
    pub name: String,
    pub attributes: MachineAttributes,
    pub restriction: Option<ScheduleWindows>,
    pub owner_sessions: Vec<(Timestamp, Timestamp)>,
    pub slots: Vec<SlotTruth>,
    /// Job intervals ordered by slot, then start.
    pub intervals: Vec<JobInterval>,
}

impl MachineTruth {
    fn owner_active(&self, t: Timestamp) -> bool {
        let i = self.owner_sessions.partition_point(|(_, end)| *end <= t);
        self.owner_sessions.get(i).is_some_and(|(start, _)| *start <= t)
    }
}

/// Hourly idle and held backlog of one user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UserBacklog {
    pub user: String,
    pub hourly: Vec<(u64, u64)>,
}

/// Everything that happened in a simulated pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroundTruth {
    seed: u64,
    start: Timestamp,
    end: Timestamp,
    machines: Vec<MachineTruth>,
    backlog: Vec<UserBacklog>,
}

impl GroundTruth {
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn start(&self) -> Timestamp {
        self.start
    }
    pub fn end(&self) -> Timestamp {
        self.end
    }
    /// Machines ordered by name.
    pub fn machines(&self) -> &[MachineTruth] {
        &self.machines
    }
    pub fn machine(&self, name: &str) -> Option<&MachineTruth> {
        self.machines.iter().find(|m| m.name == name)
    }
    pub fn backlog(&self) -> &[UserBacklog] {
        &self.backlog
    }

    pub fn job_intervals(&self) -> impl Iterator<Item = &JobInterval> {
        self.machines.iter().flat_map(|m| m.intervals.iter())
    }

    /// The registry a pool operator would keep for this pool.
    pub fn registry(&self) -> MachineRegistry {
        MachineRegistry::new(
            self.machines
                .iter()
                .map(|m| RegistryEntry {
                    machine: m.name.clone(),
                    slot_count: m.attributes.slot_count,
                    restriction: m.restriction.clone(),
                })
                .collect(),
        )
        .expect("simulated names are unique and valid")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ground truth serialises")
    }
}

/// A job before ids are assigned: machine index, slot, owner, segments as
/// second offsets from the scenario start.
struct DraftJob {
    machine: usize,
    slot: u32,
    owner: String,
    segments: Vec<(JobPhase, i64, i64)>,
}

struct DraftMachine {
    attributes: MachineAttributes,
    restriction: Option<ScheduleWindows>,
    sessions: Vec<(i64, i64)>,
}

fn in_session(sessions: &[(i64, i64)], t: i64) -> bool {
    let i = sessions.partition_point(|(_, end)| *end <= t);
    sessions.get(i).is_some_and(|(start, _)| *start <= t)
}

fn push_segment(segs: &mut Vec<(JobPhase, i64, i64)>, phase: JobPhase, a: i64, b: i64) {
    if a >= b {
        return;
    }
    match segs.last_mut() {
        Some(last) if last.0 == phase && last.2 == a => last.2 = b,
        _ => segs.push((phase, a, b)),
    }
}

fn simulate_machine(s: &Scenario, index: usize, jobs: &mut Vec<DraftJob>) -> DraftMachine {
    let mut r = rng::stream(s.seed, index as u64 + 1);
    let dur = s.duration_s as i64;
    let slot_count = s.slot_count(index);
    let utc = FixedOffset::east_opt(0).expect("zero offset");

    let (os_name, os_version) = OPERATING_SYSTEMS[rng::below(&mut r, OPERATING_SYSTEMS.len() as u64) as usize];
    let mem_per_slot = MEMORY_PER_SLOT_MB[rng::below(&mut r, MEMORY_PER_SLOT_MB.len() as u64) as usize];
    let disk_per_slot = 500 + rng::below(&mut r, 50_000);
    let restricted = rng::bernoulli(&mut r, s.restricted_fraction);
    let n = slot_count as usize;
    let attributes = MachineAttributes {
        slot_count,
        os_name: os_name.into(),
        os_version: os_version.into(),
        memory_mb_total: mem_per_slot * u64::from(slot_count),
        memory_mb_per_slot: vec![mem_per_slot; n],
        disk_mb_free_total: disk_per_slot * u64::from(slot_count),
        disk_mb_free_per_slot: vec![disk_per_slot; n],
        load_avg_total: Load::default(),
        load_avg_condor: Load::default(),
    };
    let restriction = restricted.then(|| s.restriction.clone());

    let mut sessions = Vec::new();
    if s.owner_rate_per_machine_hour > 0.0 {
        let mean_gap = 3600.0 / s.owner_rate_per_machine_hour;
        let mut t = 0i64;
        loop {
            t += rng::exp_secs(&mut r, mean_gap);
            if t >= dur {
                break;
            }
            let end = (t + rng::exp_secs(&mut r, s.mean_owner_length_s)).min(dur);
            sessions.push((t, end));
            t = end;
        }
    }

    if s.job_rate_per_slot_hour > 0.0 {
        let mean_gap = 3600.0 / s.job_rate_per_slot_hour;
        for slot in 1..=slot_count {
            let mut t = 0i64;
            loop {
                t += rng::exp_secs(&mut r, mean_gap);
                if t >= dur {
                    break;
                }
                let allowed = restriction
                    .as_ref()
                    .is_none_or(|w| w.allows(s.start + TimeDelta::seconds(t), utc));
                if in_session(&sessions, t) || !allowed {
                    continue;
                }
                let owner = s.users[rng::below(&mut r, s.users.len() as u64) as usize].clone();
                let mut remaining = rng::exp_secs(&mut r, s.mean_job_length_s);
                let mut segs = Vec::new();
                let mut pos = t;
                for &(a, b) in sessions.iter().filter(|(a, _)| *a > t) {
                    if pos + remaining <= a {
                        break;
                    }
                    if slot == 1 || rng::bernoulli(&mut r, s.suspend_probability) {
                        push_segment(&mut segs, JobPhase::Running, pos, a);
                        remaining -= a - pos;
                        push_segment(&mut segs, JobPhase::Suspended, a, b);
                        pos = b;
                    }
                }
                push_segment(&mut segs, JobPhase::Running, pos, pos + remaining);
                let segs: Vec<_> = segs
                    .into_iter()
                    .filter(|&(_, a, _)| a < dur)
                    .map(|(p, a, b)| (p, a, b.min(dur)))
                    .collect();
                t = segs.last().expect("job has a segment").2;
                jobs.push(DraftJob {
                    machine: index,
                    slot,
                    owner,
                    segments: segs,
                });
                if t >= dur {
                    break;
                }
            }
        }
    }

    DraftMachine {
        attributes,
        restriction,
        sessions,
    }
}

/// Runs a scenario. The same scenario always yields the same truth.
pub fn simulate(s: &Scenario) -> Result<GroundTruth, InvalidScenario> {
    s.validate()?;
    let dur = s.duration_s as i64;
    let at = |off: i64| s.start + TimeDelta::seconds(off);

    let mut drafts = Vec::new();
    let mut jobs = Vec::new();
    for i in 0..s.machines as usize {
        drafts.push(simulate_machine(s, i, &mut jobs));
    }
    jobs.sort_by_key(|j| (j.segments[0].1, j.machine, j.slot));

    let mut machines: Vec<MachineTruth> = drafts
        .into_iter()
        .enumerate()
        .map(|(i, d)| MachineTruth {
            name: format!("node{:03}", i + 1),
            slots: (1..=d.attributes.slot_count)
                .map(|slot| SlotTruth { slot, spans: Vec::new() })
                .collect(),
            attributes: d.attributes,
            restriction: d.restriction,
            owner_sessions: d.sessions.iter().map(|&(a, b)| (at(a), at(b))).collect(),
            intervals: Vec::new(),
        })
        .collect();

    // Job spans per (machine, slot) in time order, ids by pool-wide start order.
    let mut per_slot: Vec<Vec<Vec<(i64, i64, SpanKind)>>> = machines
        .iter()
        .map(|m| vec![Vec::new(); m.slots.len()])
        .collect();
    for (k, job) in jobs.iter().enumerate() {
        let job_id = JobId::new(k as u64 + 1, 0);
        let m = &mut machines[job.machine];
        let segments = job
            .segments
            .iter()
            .map(|&(phase, a, b)| Segment {
                phase,
                start: at(a),
                end: at(b),
            })
            .collect();
        m.intervals.push(
            JobInterval::new(&m.name, job.slot, job_id.clone(), &job.owner, segments)
                .expect("simulated intervals are well formed"),
        );
        for &(phase, a, b) in &job.segments {
            per_slot[job.machine][job.slot as usize - 1].push((
                a,
                b,
                SpanKind::Job {
                    job_id: job_id.clone(),
                    owner: job.owner.clone(),
                    phase,
                },
            ));
        }
    }

    for (mi, m) in machines.iter_mut().enumerate() {
        m.intervals.sort_by_key(|iv| (iv.slot(), iv.start()));
        let sessions: Vec<(i64, i64)> = m
            .owner_sessions
            .iter()
            .map(|(a, b)| ((*a - s.start).num_seconds(), (*b - s.start).num_seconds()))
            .collect();
        for (si, slot) in m.slots.iter_mut().enumerate() {
            let mut job_spans = std::mem::take(&mut per_slot[mi][si]);
            job_spans.sort_by_key(|(a, _, _)| *a);
            let mut spans: Vec<(i64, i64, SpanKind)> = Vec::new();
            let mut cursor = 0i64;
            let fill_free = |from: i64, to: i64, spans: &mut Vec<(i64, i64, SpanKind)>| {
                let mut c = from;
                if slot.slot == 1 {
                    for &(a, b) in &sessions {
                        let (a, b) = (a.max(from), b.min(to));
                        if a >= b {
                            continue;
                        }
                        if a > c {
                            spans.push((c, a, SpanKind::Idle));
                        }
                        spans.push((a, b, SpanKind::Owner));
                        c = b;
                    }
                }
                if c < to {
                    spans.push((c, to, SpanKind::Idle));
                }
            };
            for (a, b, kind) in job_spans {
                if a > cursor {
                    fill_free(cursor, a, &mut spans);
                }
                spans.push((a, b, kind));
                cursor = b;
            }
            if cursor < dur {
                fill_free(cursor, dur, &mut spans);
            }
            slot.spans = spans
                .into_iter()
                .map(|(a, b, kind)| TruthSpan {
                    start: at(a),
                    end: at(b),
                    kind,
                })
                .collect();
        }
    }

    let mut qr = rng::stream(s.seed, 0);
    let hours = (s.duration_s as usize).div_ceil(3600);
    let backlog = s
        .users
        .iter()
        .map(|user| UserBacklog {
            user: user.clone(),
            hourly: (0..hours)
                .map(|_| {
                    (
                        rng::below(&mut qr, u64::from(s.max_idle_per_user) + 1),
                        rng::below(&mut qr, 3),
                    )
                })
                .collect(),
        })
        .collect();

    Ok(GroundTruth {
        seed: s.seed,
        start: s.start,
        end: s.end(),
        machines,
        backlog,
    })
}

/// Status and queue listings the simulated pool reports at `t`, which must
/// lie within the simulated span. Loads: one per running job, one more while
/// an owner session is on, plus a 0.02 background.
pub fn status_at(truth: &GroundTruth, t: Timestamp) -> (String, String) {
    let t = t.min(truth.end).max(truth.start);
    let mut status = String::new();
    let mut in_flight: Vec<u64> = vec![0; truth.backlog.len()];
    for m in &truth.machines {
        let mut slot_lines = Vec::with_capacity(m.slots.len());
        let mut running = 0u32;
        for slot in &m.slots {
            let span = slot.span_at(t);
            let (state, activity, job) = span.kind.observed();
            if let SpanKind::Job { owner, phase, .. } = &span.kind {
                if *phase == JobPhase::Running {
                    running += 1;
                }
                if let Some(i) = truth.backlog.iter().position(|b| b.user == *owner) {
                    in_flight[i] += 1;
                }
            }
            let load = if activity == SlotActivity::Busy {
                Load::from_hundredths(100)
            } else {
                Load::default()
            };
            let o = SlotObservation::new(t, &m.name, slot.slot, state, activity, load, job)
                .expect("simulated observations are valid");
            slot_lines.push(render_slot(&o));
        }
        let condor = running * 100;
        let owner = if m.owner_active(t) { 100 } else { 0 };
        let attributes = MachineAttributes {
            load_avg_total: Load::from_hundredths(condor + owner + 2),
            load_avg_condor: Load::from_hundredths(condor),
            ..m.attributes.clone()
        };
        let record = MachineRecord::new(t, &m.name, attributes).expect("simulated attributes are valid");
        status.push_str(&render_machine(&record));
        status.push('\n');
        for line in slot_lines {
            status.push_str(&line);
            status.push('\n');
        }
    }
    let hour = ((t - truth.start).num_seconds() / 3600) as usize;
    let rows = truth
        .backlog
        .iter()
        .zip(in_flight)
        .map(|(b, running)| {
            let (idle, held) = b.hourly.get(hour).or(b.hourly.last()).copied().unwrap_or((0, 0));
            QueueRow {
                user: b.user.clone(),
                counts: QueueCounts { running, idle, held },
            }
        })
        .collect();
    (status, render_queue_output(&QueueSummary::from_rows(rows)))
}

/// Writes a complete data root for the scenario by running the collector
/// against the simulated pool on a simulated clock, plus the registry and a
/// ground-truth sidecar. Returns the truth and one report per poll.
pub fn emit_data_root(
    scenario: &Scenario,
    root: &DataRoot,
) -> Result<(Arc<GroundTruth>, Vec<PollReport>), EmitError> {
    let truth = Arc::new(simulate(scenario)?);
    let _lock = WriterLock::acquire(root)?;
    root.save_registry(&truth.registry())?;
    let source = SimSource::new(truth.clone());
    let clock = SimClock::until(truth.start(), truth.end());
    let mut reports = Vec::new();
    run_loop(scenario.interval_s, &source, root, &clock, &StopSignal::new(), |r| {
        reports.push(r.clone())
    });
    write_sidecar(&truth, root.path())?;
    Ok((truth, reports))
}

pub fn write_sidecar(truth: &GroundTruth, dir: &Path) -> Result<(), StorageError> {
    let path = dir.join(GROUND_TRUTH_FILE);
    fs::write(&path, truth.to_json()).map_err(|source| StorageError::Io { path, source })
}

#[derive(Debug, thiserror::Error)]
pub enum EmitError {
    #[error(transparent)]
    Scenario(#[from] InvalidScenario),
    #[error(transparent)]
    Storage(#[from] StorageError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{parse_queue_output, parse_status_output};

    fn small() -> Scenario {
        Scenario {
            seed: 5,
            machines: 3,
            slots_per_machine: vec![1, 2, 4],
            duration_s: 2 * 86_400,
            job_rate_per_slot_hour: 0.4,
            mean_job_length_s: 5000.0,
            owner_rate_per_machine_hour: 0.3,
            mean_owner_length_s: 1800.0,
            restricted_fraction: 0.0,
            ..Scenario::default()
        }
    }

    #[test]
    fn zero_rates_leave_every_slot_idle() {
        let s = Scenario {
            job_rate_per_slot_hour: 0.0,
            owner_rate_per_machine_hour: 0.0,
            ..small()
        };
        let truth = simulate(&s).unwrap();
        assert_eq!(truth.job_intervals().count(), 0);
        for m in truth.machines() {
            for slot in &m.slots {
                assert_eq!(slot.spans.len(), 1);
                assert_eq!(slot.spans[0].kind, SpanKind::Idle);
                assert_eq!((slot.spans[0].start, slot.spans[0].end), (truth.start(), truth.end()));
            }
        }
    }

    #[test]
    fn same_seed_same_truth() {
        assert_eq!(simulate(&small()).unwrap(), simulate(&small()).unwrap());
        let other = Scenario { seed: 6, ..small() };
        assert_ne!(simulate(&small()).unwrap(), simulate(&other).unwrap());
    }

    #[test]
    fn weekend_only_machines_stay_empty_on_weekdays() {
        // 2014-06-02 is a Monday; five weekdays follow.
        let s = Scenario {
            restricted_fraction: 1.0,
            duration_s: 5 * 86_400,
            job_rate_per_slot_hour: 2.0,
            ..small()
        };
        let truth = simulate(&s).unwrap();
        assert!(truth.machines().iter().all(|m| m.restriction.is_some()));
        assert_eq!(truth.job_intervals().count(), 0);
    }

    #[test]
    fn spans_tile_the_duration() {
        let truth = simulate(&small()).unwrap();
        for m in truth.machines() {
            for slot in &m.slots {
                assert_eq!(slot.spans.first().unwrap().start, truth.start());
                assert_eq!(slot.spans.last().unwrap().end, truth.end());
                for w in slot.spans.windows(2) {
                    assert_eq!(w[0].end, w[1].start);
                }
                assert!(slot.spans.iter().all(|s| s.start < s.end));
                if slot.slot != 1 {
                    assert!(slot.spans.iter().all(|s| s.kind != SpanKind::Owner));
                }
            }
        }
        assert!(truth.job_intervals().count() > 10);
        assert!(truth
            .machines()
            .iter()
            .flat_map(|m| &m.slots)
            .flat_map(|s| &s.spans)
            .any(|s| matches!(s.kind, SpanKind::Job { phase: JobPhase::Suspended, .. })));
    }

    #[test]
    fn intervals_agree_with_spans() {
        let truth = simulate(&small()).unwrap();
        for m in truth.machines() {
            for iv in &m.intervals {
                let slot = &m.slots[iv.slot() as usize - 1];
                for seg in iv.segments() {
                    let span = slot.span_at(seg.start);
                    assert_eq!((span.start, span.end), (seg.start, seg.end));
                    assert!(matches!(&span.kind, SpanKind::Job { job_id, phase, .. } if job_id == iv.job_id() && *phase == seg.phase));
                }
            }
        }
    }

    #[test]
    fn status_at_start_is_all_free() {
        let s = Scenario {
            owner_rate_per_machine_hour: 0.0,
            ..small()
        };
        let truth = simulate(&s).unwrap();
        let (status, _) = status_at(&truth, truth.start());
        assert!(status.lines().filter(|l| l.starts_with("S|")).all(|l| l.contains("|Unclaimed|Idle|")));
    }

    #[test]
    fn listing_is_loss_free_at_random_instants() {
        let truth = simulate(&small()).unwrap();
        let registry = truth.registry();
        let mut r = rng::stream(99, 0);
        let span = (truth.end() - truth.start()).num_seconds() as u64;
        for _ in 0..1000 {
            let t = truth.start() + TimeDelta::seconds(rng::below(&mut r, span + 1) as i64);
            let (status, queue) = status_at(&truth, t);
            let snap = parse_status_output(&status, t, &registry).unwrap();
            assert_eq!(snap.machines.len(), truth.machines().len());
            let mut in_flight = 0;
            for (ms, mt) in snap.machines.iter().zip(truth.machines()) {
                assert_eq!(ms.info.machine, mt.name);
                for (o, st) in ms.slots.iter().zip(&mt.slots) {
                    let (state, activity, job) = st.span_at(t).kind.observed();
                    assert_eq!((o.state(), o.activity(), o.job()), (state, activity, job.as_ref()));
                    in_flight += u64::from(job.is_some());
                }
            }
            let q = parse_queue_output(&queue).unwrap();
            assert_eq!(q.rows().len(), 3);
            let hour = ((t - truth.start()).num_seconds() / 3600) as usize;
            let backlog: u64 = truth
                .backlog()
                .iter()
                .map(|b| {
                    let (i, h) = b.hourly[hour.min(b.hourly.len() - 1)];
                    i + h
                })
                .sum();
            let totals = q.totals();
            assert_eq!(totals.running, in_flight);
            assert_eq!(totals.running + totals.idle + totals.held, in_flight + backlog);
        }
    }

    #[test]
    fn emitted_root_has_one_record_per_slot_and_tick() {
        let dir = tempfile::tempdir().unwrap();
        let root = DataRoot::new(dir.path());
        let s = Scenario {
            duration_s: 86_400,
            ..small()
        };
        let (truth, reports) = emit_data_root(&s, &root).unwrap();
        assert_eq!(reports.len(), 288);
        assert!(reports.iter().all(|r| r.errors.is_empty() && r.slots_written == 7));
        assert_eq!(root.load_registry().unwrap(), truth.registry());
        assert!(dir.path().join(GROUND_TRUTH_FILE).exists());
        let (obs, corrupt) = root
            .read_machine_day("node003", truth.start().date_naive(), crate::storage::ReadMode::Strict)
            .unwrap();
        assert_eq!((obs.len(), corrupt), (288 * 4, 0));
        assert!(obs.iter().all(|o| (o.timestamp() - truth.start()).num_seconds() % 300 == 0));
    }
}
