//! Job interval reconstruction and usage accounting.
//!
//! Sampling semantics: an observation taken at tick `t` of a slot running
//! job `J` in phase `P` covers `[t, t + interval)`. A later observation of the
//! same slot cuts the cover short at its own tick. Consecutive observations
//! of the same job separated by more than one interval but at most
//! `gap_limit` are bridged, the earlier phase extending over the gap; larger
//! gaps split the job into two intervals. Phase segments switch exactly at
//! the tick where the observed phase changes.

use std::collections::BTreeMap;

use chrono::{Datelike, Days, Duration, NaiveDate, NaiveTime};
use serde::Serialize;
use thiserror::Error;

use crate::model::{
    DailySummary, JobId, JobInterval, JobPhase, JobRef, ModelError, PeriodSummary, Segment,
    SlotObservation, Timestamp,
};
use crate::storage::{DataRoot, ReadMode, StorageError};

pub const DAY_SECONDS: i64 = 86_400;

#[derive(Debug, Error)]
pub enum TimelineError {
    #[error("observations are not sorted by (timestamp, slot) at index {0}")]
    UnsortedInput(usize),
    #[error("observations mix machines {expected} and {found}")]
    MixedMachines { expected: String, found: String },
    #[error("interval on slot {slot} exceeds the machine's {slot_count} slots")]
    SlotCountMismatch { slot: u32, slot_count: u32 },
    #[error("invalid reconstruction parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Sampling interval of the collector and the bridging limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReconstructionParams {
    interval_s: u32,
    gap_limit_s: u32,
}

impl ReconstructionParams {
    /// `gap_limit_s` must lie in `interval_s..=86400` so that a day's
    /// accounting depends only on that day and its two neighbours.
    pub fn new(interval_s: u32, gap_limit_s: u32) -> Result<Self, TimelineError> {
        if interval_s == 0 {
            return Err(TimelineError::InvalidParams("interval must be positive".into()));
        }
        if gap_limit_s < interval_s || i64::from(gap_limit_s) > DAY_SECONDS {
            return Err(TimelineError::InvalidParams(format!(
                "gap limit {gap_limit_s} s must be within [{interval_s}, {DAY_SECONDS}]"
            )));
        }
        Ok(ReconstructionParams {
            interval_s,
            gap_limit_s,
        })
    }

    /// Default gap limit of two intervals.
    pub fn with_interval(interval_s: u32) -> Result<Self, TimelineError> {
        Self::new(interval_s, interval_s.saturating_mul(2).min(DAY_SECONDS as u32).max(interval_s))
    }

    pub fn interval_s(&self) -> u32 {
        self.interval_s
    }

    pub fn gap_limit_s(&self) -> u32 {
        self.gap_limit_s
    }

    fn interval(&self) -> Duration {
        Duration::seconds(i64::from(self.interval_s))
    }

    fn gap_limit(&self) -> Duration {
        Duration::seconds(i64::from(self.gap_limit_s))
    }
}

/// Week or calendar-month period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Span {
    Week,
    Month,
}

impl Span {
    pub fn days_from(self, start: NaiveDate) -> u32 {
        match self {
            Span::Week => 7,
            Span::Month => days_in_month(start),
        }
    }
}

pub fn days_in_month(date: NaiveDate) -> u32 {
    let first = date.with_day(1).expect("day 1 exists");
    let next = first
        .checked_add_months(chrono::Months::new(1))
        .expect("date within chrono range");
    (next - first).num_days() as u32
}

pub fn day_start(date: NaiveDate) -> Timestamp {
    date.and_time(NaiveTime::MIN).and_utc()
}

pub fn day_end(date: NaiveDate) -> Timestamp {
    day_start(date) + Duration::seconds(DAY_SECONDS)
}

struct OpenInterval {
    job: JobRef,
    closed: Vec<Segment>,
    phase: JobPhase,
    phase_start: Timestamp,
    last_tick: Timestamp,
}

impl OpenInterval {
    fn start(job: JobRef, phase: JobPhase, t: Timestamp) -> Self {
        OpenInterval {
            job,
            closed: Vec::new(),
            phase,
            phase_start: t,
            last_tick: t,
        }
    }

    fn finish(mut self, machine: &str, slot: u32, end: Timestamp) -> Result<JobInterval, ModelError> {
        self.closed.push(Segment {
            phase: self.phase,
            start: self.phase_start,
            end,
        });
        JobInterval::new(machine, slot, self.job.job_id, self.job.owner, self.closed)
    }
}

fn check_input(obs: &[SlotObservation]) -> Result<(), TimelineError> {
    for (i, w) in obs.windows(2).enumerate() {
        if w[1].order_key() < w[0].order_key() {
            return Err(TimelineError::UnsortedInput(i + 1));
        }
    }
    if let Some(first) = obs.first() {
        if let Some(other) = obs.iter().find(|o| o.machine() != first.machine()) {
            return Err(TimelineError::MixedMachines {
                expected: first.machine().to_string(),
                found: other.machine().to_string(),
            });
        }
    }
    Ok(())
}

/// Rebuilds job intervals from one machine's observations, which must be
/// sorted by `(timestamp, slot)`. Intervals are returned ordered by slot,
/// then start.
pub fn reconstruct_intervals(
    obs: &[SlotObservation],
    params: ReconstructionParams,
) -> Result<Vec<JobInterval>, TimelineError> {
    check_input(obs)?;
    let Some(first) = obs.first() else {
        return Ok(Vec::new());
    };
    let machine = first.machine();
    let mut by_slot: BTreeMap<u32, Vec<&SlotObservation>> = BTreeMap::new();
    for o in obs {
        let ticks = by_slot.entry(o.slot()).or_default();
        // The first sample of a tick wins; later duplicates carry no new time.
        if ticks.last().is_some_and(|prev| prev.timestamp() == o.timestamp()) {
            continue;
        }
        ticks.push(o);
    }

    let mut out = Vec::new();
    for (slot, ticks) in by_slot {
        let mut open: Option<OpenInterval> = None;
        for o in ticks {
            let t = o.timestamp();
            let current = o.phase().zip(o.job());
            if let Some(mut op) = open.take() {
                let same_job = current.is_some_and(|(_, job)| *job == op.job);
                if same_job && t - op.last_tick <= params.gap_limit() {
                    let (phase, _) = current.expect("same job implies a phase");
                    if phase != op.phase {
                        op.closed.push(Segment {
                            phase: op.phase,
                            start: op.phase_start,
                            end: t,
                        });
                        op.phase = phase;
                        op.phase_start = t;
                    }
                    op.last_tick = t;
                    open = Some(op);
                    continue;
                }
                let end = (op.last_tick + params.interval()).min(t);
                out.push(op.finish(machine, slot, end)?);
            }
            if let Some((phase, job)) = current {
                open = Some(OpenInterval::start(job.clone(), phase, t));
            }
        }
        if let Some(op) = open {
            let end = op.last_tick + params.interval();
            out.push(op.finish(machine, slot, end)?);
        }
    }
    Ok(out)
}

/// Clips intervals to one UTC day, dropping those outside it.
pub fn clip_to_day(intervals: &[JobInterval], date: NaiveDate) -> Vec<JobInterval> {
    let (from, to) = (day_start(date), day_end(date));
    intervals.iter().filter_map(|i| i.clip(from, to)).collect()
}

/// Daily table from intervals already clipped to `date`.
pub fn day_summary(
    intervals: &[JobInterval],
    machine: &str,
    slot_count: u32,
    date: NaiveDate,
) -> Result<DailySummary, TimelineError> {
    let (from, to) = (day_start(date), day_end(date));
    let mut running = 0i64;
    let mut suspended = 0i64;
    for interval in intervals {
        if interval.slot() > slot_count {
            return Err(TimelineError::SlotCountMismatch {
                slot: interval.slot(),
                slot_count,
            });
        }
        if let Some(c) = interval.clip(from, to) {
            running += c.phase_s(JobPhase::Running);
            suspended += c.phase_s(JobPhase::Suspended);
        }
    }
    Ok(DailySummary::new(
        machine,
        date,
        slot_count,
        running as u64,
        suspended as u64,
    )?)
}

/// One step of the concurrency curve: from `t` until the next step, this
/// many slots were running or suspended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CurveStep {
    pub t: Timestamp,
    pub running_count: u32,
    pub suspended_count: u32,
}

/// Step function of simultaneously running and suspended jobs over `date`.
/// The first step is at midnight; consecutive steps always differ.
pub fn concurrency_curve(intervals: &[JobInterval], date: NaiveDate) -> Vec<CurveStep> {
    let (from, to) = (day_start(date), day_end(date));
    let mut deltas: BTreeMap<Timestamp, (i64, i64)> = BTreeMap::new();
    for interval in intervals {
        let Some(c) = interval.clip(from, to) else { continue };
        for s in c.segments() {
            let d = match s.phase {
                JobPhase::Running => (1, 0),
                JobPhase::Suspended => (0, 1),
            };
            let e = deltas.entry(s.start).or_default();
            e.0 += d.0;
            e.1 += d.1;
            let e = deltas.entry(s.end).or_default();
            e.0 -= d.0;
            e.1 -= d.1;
        }
    }
    let mut steps = vec![CurveStep {
        t: from,
        running_count: 0,
        suspended_count: 0,
    }];
    let (mut running, mut suspended) = (0i64, 0i64);
    for (t, (dr, ds)) in deltas {
        running += dr;
        suspended += ds;
        if t >= to {
            break;
        }
        let step = CurveStep {
            t,
            running_count: running as u32,
            suspended_count: suspended as u32,
        };
        let last = steps.last_mut().expect("non-empty");
        if last.t == t {
            *last = step;
        } else if (last.running_count, last.suspended_count) != (step.running_count, step.suspended_count) {
            steps.push(step);
        }
    }
    steps
}

/// How much of a day was actually observed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SampleCoverage {
    pub interval_s: u32,
    pub observed_ticks: usize,
    pub expected_ticks: usize,
    pub observed_s: u64,
    /// Stretches of the day covered by no observation.
    pub unobserved: Vec<(Timestamp, Timestamp)>,
}

pub fn sample_coverage(obs: &[SlotObservation], date: NaiveDate, params: ReconstructionParams) -> SampleCoverage {
    let (from, to) = (day_start(date), day_end(date));
    let mut ticks: Vec<Timestamp> = obs
        .iter()
        .map(SlotObservation::timestamp)
        .filter(|t| *t >= from && *t < to)
        .collect();
    ticks.dedup();
    let mut unobserved = Vec::new();
    let mut observed_s = 0i64;
    let mut cursor = from;
    for &t in &ticks {
        if t > cursor {
            unobserved.push((cursor, t));
        }
        let end = (t + params.interval()).min(to);
        if end > cursor {
            observed_s += (end - cursor.max(t)).num_seconds();
            cursor = end;
        }
    }
    if cursor < to {
        unobserved.push((cursor, to));
    }
    SampleCoverage {
        interval_s: params.interval_s,
        observed_ticks: ticks.len(),
        expected_ticks: (DAY_SECONDS / i64::from(params.interval_s)) as usize,
        observed_s: observed_s as u64,
        unobserved,
    }
}

/// Interval as shown in the per-slot detail view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntervalView {
    pub slot: u32,
    pub job_id: JobId,
    pub owner: String,
    /// Phase of the last segment.
    pub status: JobPhase,
    pub start: Timestamp,
    pub end: Timestamp,
    pub duration_s: i64,
    pub running_s: i64,
    pub suspended_s: i64,
    pub segments: Vec<Segment>,
}

impl From<&JobInterval> for IntervalView {
    fn from(i: &JobInterval) -> Self {
        IntervalView {
            slot: i.slot(),
            job_id: i.job_id().clone(),
            owner: i.owner().to_string(),
            status: i.segments().last().expect("intervals are non-empty").phase,
            start: i.start(),
            end: i.end(),
            duration_s: i.duration_s(),
            running_s: i.phase_s(JobPhase::Running),
            suspended_s: i.phase_s(JobPhase::Suspended),
            segments: i.segments().to_vec(),
        }
    }
}

/// Payload of the per-slot detail view of one machine-day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DayDetail {
    pub machine: String,
    pub date: NaiveDate,
    pub slot_count: u32,
    /// Intervals touching the day, not clipped.
    pub intervals: Vec<IntervalView>,
    pub concurrency_curve: Vec<CurveStep>,
    pub coverage: SampleCoverage,
    pub corrupt_lines: usize,
}

/// Intervals reconstructed from a window of stored days. Days outside the
/// window's interior may be truncated.
struct Reconstruction {
    intervals: Vec<JobInterval>,
    observations: Vec<SlotObservation>,
    corrupt_lines: usize,
}

fn reconstruct_window(
    root: &DataRoot,
    machine: &str,
    first: NaiveDate,
    span_days: u32,
    params: ReconstructionParams,
    mode: ReadMode,
) -> Result<Reconstruction, TimelineError> {
    // One neighbour day on each side: bridging and cover truncation never
    // reach further because gap_limit <= one day.
    let read_from = first.checked_sub_days(Days::new(1)).unwrap_or(first);
    let lead = (first - read_from).num_days() as u32;
    let range = root.read_range(machine, read_from, span_days + lead + 1, mode)?;
    let observations: Vec<SlotObservation> = range.days.into_iter().flat_map(|(_, o)| o).collect();
    let intervals = reconstruct_intervals(&observations, params)?;
    Ok(Reconstruction {
        intervals,
        observations,
        corrupt_lines: range.corrupt_lines,
    })
}

/// Daily table for one stored machine-day.
pub fn stored_day_summary(
    root: &DataRoot,
    machine: &str,
    slot_count: u32,
    date: NaiveDate,
    params: ReconstructionParams,
    mode: ReadMode,
) -> Result<DailySummary, TimelineError> {
    let rec = reconstruct_window(root, machine, date, 1, params, mode)?;
    day_summary(&clip_to_day(&rec.intervals, date), machine, slot_count, date)
}

/// Detail view for one stored machine-day.
pub fn stored_day_detail(
    root: &DataRoot,
    machine: &str,
    slot_count: u32,
    date: NaiveDate,
    params: ReconstructionParams,
    mode: ReadMode,
) -> Result<DayDetail, TimelineError> {
    let rec = reconstruct_window(root, machine, date, 1, params, mode)?;
    let (from, to) = (day_start(date), day_end(date));
    let touching: Vec<&JobInterval> = rec
        .intervals
        .iter()
        .filter(|i| i.start() < to && i.end() > from)
        .collect();
    if let Some(bad) = touching.iter().find(|i| i.slot() > slot_count) {
        return Err(TimelineError::SlotCountMismatch {
            slot: bad.slot(),
            slot_count,
        });
    }
    let clipped = clip_to_day(&rec.intervals, date);
    let day_obs: Vec<SlotObservation> = rec
        .observations
        .into_iter()
        .filter(|o| o.timestamp().date_naive() == date)
        .collect();
    Ok(DayDetail {
        machine: machine.to_string(),
        date,
        slot_count,
        intervals: touching.into_iter().map(IntervalView::from).collect(),
        concurrency_curve: concurrency_curve(&clipped, date),
        coverage: sample_coverage(&day_obs, date, params),
        corrupt_lines: rec.corrupt_lines,
    })
}

/// Week or month summary starting at `start`.
pub fn period_summary(
    root: &DataRoot,
    machine: &str,
    slot_count: u32,
    start: NaiveDate,
    span: Span,
    params: ReconstructionParams,
    mode: ReadMode,
) -> Result<PeriodSummary, TimelineError> {
    let span_days = span.days_from(start);
    let rec = reconstruct_window(root, machine, start, span_days, params, mode)?;
    let per_day = (0..span_days)
        .map(|i| {
            let date = start + Days::new(u64::from(i));
            day_summary(&clip_to_day(&rec.intervals, date), machine, slot_count, date)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PeriodSummary::new(machine, start, per_day)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Load, SlotActivity, SlotState};
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;

    const DELTA: i64 = 300;

    fn base() -> Timestamp {
        Utc.with_ymd_and_hms(2014, 6, 2, 0, 0, 0).unwrap()
    }

    fn june(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2014, 6, d).unwrap()
    }

    #[derive(Clone, Copy, Debug, PartialEq, Eq)]
    enum S {
        Idle,
        Run(u64),
        Sus(u64),
    }

    fn obs(secs: i64, slot: u32, s: S) -> SlotObservation {
        let t = base() + Duration::seconds(secs);
        let job = |id: u64| {
            Some(JobRef {
                job_id: JobId::new(id, 0),
                owner: format!("user{id}"),
            })
        };
        let (state, activity, job) = match s {
            S::Idle => (SlotState::Unclaimed, SlotActivity::Idle, None),
            S::Run(id) => (SlotState::Claimed, SlotActivity::Busy, job(id)),
            S::Sus(id) => (SlotState::Claimed, SlotActivity::Suspended, job(id)),
        };
        SlotObservation::new(t, "epico", slot, state, activity, Load::default(), job).unwrap()
    }

    fn params(gap: u32) -> ReconstructionParams {
        ReconstructionParams::new(DELTA as u32, gap).unwrap()
    }

    /// Independent oracle: paints every second covered by an observation
    /// (later ticks overwrite earlier ones), fills bridged gaps between
    /// consecutive samples of the same job, then compresses the per-second
    /// trace into intervals. Returns (slot, job, start, end, [(phase, start, end)]).
    #[allow(clippy::type_complexity)]
    fn oracle(obs: &[SlotObservation], delta: i64, gap_limit: i64) -> Vec<(u32, String, i64, i64, Vec<(JobPhase, i64, i64)>)> {
        let secs = |t: Timestamp| (t - base()).num_seconds();
        let horizon = obs.iter().map(|o| secs(o.timestamp())).max().unwrap_or(0) + delta + 1;
        let mut slots: Vec<u32> = obs.iter().map(|o| o.slot()).collect();
        slots.sort();
        slots.dedup();
        let mut out = Vec::new();
        for slot in slots {
            let mut trace: Vec<Option<(String, JobPhase)>> = vec![None; horizon as usize];
            let mut ticks: Vec<&SlotObservation> = obs.iter().filter(|o| o.slot() == slot).collect();
            ticks.dedup_by_key(|o| o.timestamp());
            for o in &ticks {
                let t = secs(o.timestamp());
                let v = o.phase().map(|p| (o.job_id().unwrap().to_string(), p));
                for s in t..t + delta {
                    trace[s as usize] = v.clone();
                }
            }
            for w in ticks.windows(2) {
                let (a, b) = (secs(w[0].timestamp()), secs(w[1].timestamp()));
                if w[0].phase().is_some() && w[0].job_id() == w[1].job_id() && b - a > delta && b - a <= gap_limit {
                    let v = Some((w[0].job_id().unwrap().to_string(), w[0].phase().unwrap()));
                    for s in a + delta..b {
                        trace[s as usize] = v.clone();
                    }
                }
            }
            let mut s = 0usize;
            while s < trace.len() {
                let Some((job, _)) = trace[s].clone() else {
                    s += 1;
                    continue;
                };
                let start = s;
                let mut segs: Vec<(JobPhase, i64, i64)> = Vec::new();
                while s < trace.len() && trace[s].as_ref().is_some_and(|(j, _)| *j == job) {
                    let phase = trace[s].as_ref().unwrap().1;
                    match segs.last_mut() {
                        Some(last) if last.0 == phase => last.2 = s as i64 + 1,
                        _ => segs.push((phase, s as i64, s as i64 + 1)),
                    }
                    s += 1;
                }
                out.push((slot, job, start as i64, s as i64, segs));
            }
        }
        out
    }

    fn flatten(intervals: &[JobInterval]) -> Vec<(u32, String, i64, i64, Vec<(JobPhase, i64, i64)>)> {
        let secs = |t: Timestamp| (t - base()).num_seconds();
        intervals
            .iter()
            .map(|i| {
                (
                    i.slot(),
                    i.job_id().to_string(),
                    secs(i.start()),
                    secs(i.end()),
                    i.segments().iter().map(|s| (s.phase, secs(s.start), secs(s.end))).collect(),
                )
            })
            .collect()
    }

    #[test]
    fn three_running_ticks_make_one_interval() {
        let o: Vec<_> = [0, 300, 600].iter().map(|&t| obs(t, 1, S::Run(12))).collect();
        let got = flatten(&reconstruct_intervals(&o, params(600)).unwrap());
        assert_eq!(got, oracle(&o, DELTA, 600));
        assert_eq!(got, vec![(1, "12.0".into(), 0, 900, vec![(JobPhase::Running, 0, 900)])]);
    }

    #[test]
    fn suspension_splits_segments_not_interval() {
        let o = vec![obs(0, 1, S::Run(12)), obs(300, 1, S::Run(12)), obs(600, 1, S::Sus(12)), obs(900, 1, S::Run(12))];
        let got = flatten(&reconstruct_intervals(&o, params(600)).unwrap());
        assert_eq!(got, oracle(&o, DELTA, 600));
        use JobPhase::*;
        assert_eq!(
            got,
            vec![(1, "12.0".into(), 0, 1200, vec![(Running, 0, 600), (Suspended, 600, 900), (Running, 900, 1200)])]
        );
    }

    #[test]
    fn long_gap_splits_interval() {
        let o = vec![obs(0, 1, S::Run(12)), obs(900, 1, S::Run(12))];
        let got = flatten(&reconstruct_intervals(&o, params(600)).unwrap());
        assert_eq!(got, oracle(&o, DELTA, 600));
        assert_eq!(got.iter().map(|g| (g.2, g.3)).collect::<Vec<_>>(), vec![(0, 300), (900, 1200)]);
    }

    #[test]
    fn short_gap_is_bridged_with_earlier_phase() {
        let o = vec![obs(0, 1, S::Sus(5)), obs(600, 1, S::Run(5))];
        let got = flatten(&reconstruct_intervals(&o, params(600)).unwrap());
        assert_eq!(got, oracle(&o, DELTA, 600));
        assert_eq!(got[0].4, vec![(JobPhase::Suspended, 0, 600), (JobPhase::Running, 600, 900)]);
    }

    #[test]
    fn next_job_cuts_previous_cover() {
        let o = vec![obs(0, 1, S::Run(1)), obs(200, 1, S::Run(2)), obs(500, 1, S::Idle)];
        let got = flatten(&reconstruct_intervals(&o, params(600)).unwrap());
        assert_eq!(got, oracle(&o, DELTA, 600));
        assert_eq!(got.iter().map(|g| (g.2, g.3)).collect::<Vec<_>>(), vec![(0, 200), (200, 500)]);
    }

    #[test]
    fn input_validation() {
        let o = vec![obs(300, 1, S::Idle), obs(0, 1, S::Idle)];
        assert!(matches!(reconstruct_intervals(&o, params(600)), Err(TimelineError::UnsortedInput(1))));
        let other = SlotObservation::new(base(), "renta", 1, SlotState::Owner, SlotActivity::Idle, Load::default(), None).unwrap();
        let o = vec![obs(0, 1, S::Idle), other.with_timestamp(base() + Duration::seconds(5)).unwrap()];
        assert!(matches!(reconstruct_intervals(&o, params(600)), Err(TimelineError::MixedMachines { .. })));
        assert!(ReconstructionParams::new(300, 299).is_err());
        assert!(ReconstructionParams::new(0, 0).is_err());
        assert!(ReconstructionParams::new(300, 90_000).is_err());
        assert_eq!(ReconstructionParams::with_interval(300).unwrap().gap_limit_s(), 600);
    }

    #[test]
    fn empty_eight_slot_day() {
        let s = day_summary(&[], "epico", 8, june(2)).unwrap();
        assert_eq!(s.theoretical_s(), 691_200);
        assert_eq!(s.owner_idle_s(), 691_200);
        assert_eq!(s.owner_idle_pct(), 100.0);
    }

    #[test]
    fn hour_running_ten_minutes_suspended() {
        let mut o: Vec<_> = (0..12).map(|i| obs(i * 300, 1, S::Run(3))).collect();
        o.extend((12..14).map(|i| obs(i * 300, 1, S::Sus(3))));
        let iv = reconstruct_intervals(&o, params(600)).unwrap();
        let s = day_summary(&clip_to_day(&iv, june(2)), "epico", 1, june(2)).unwrap();
        assert_eq!((s.running_s(), s.suspended_s(), s.owner_idle_s()), (3600, 600, 82_200));
        assert!((s.owner_idle_pct() - 95.14).abs() < 0.005);
        assert!((s.running_pct() - 4.17).abs() < 0.005);
        assert!((s.suspended_pct() - 0.69).abs() < 0.005);
    }

    #[test]
    fn midnight_crossing_is_conserved_by_clipping() {
        let o: Vec<_> = (0..6).map(|i| obs(DAY_SECONDS - 900 + i * 300, 1, S::Run(9))).collect();
        let iv = reconstruct_intervals(&o, params(600)).unwrap();
        assert_eq!(iv.len(), 1);
        let a = day_summary(&clip_to_day(&iv, june(2)), "epico", 1, june(2)).unwrap();
        let b = day_summary(&clip_to_day(&iv, june(3)), "epico", 1, june(3)).unwrap();
        assert_eq!(a.running_s() + b.running_s(), iv[0].duration_s() as u64);
        assert_eq!((a.running_s(), b.running_s()), (900, 900));
    }

    #[test]
    fn slot_beyond_count_rejected() {
        let iv = reconstruct_intervals(&[obs(0, 3, S::Run(1))], params(600)).unwrap();
        assert!(matches!(
            day_summary(&iv, "epico", 2, june(2)),
            Err(TimelineError::SlotCountMismatch { slot: 3, slot_count: 2 })
        ));
    }

    #[test]
    fn empty_curve_is_single_zero_step() {
        assert_eq!(
            concurrency_curve(&[], june(2)),
            vec![CurveStep { t: base(), running_count: 0, suspended_count: 0 }]
        );
    }

    #[test]
    fn overlapping_slots_stack_in_curve() {
        let o = vec![obs(0, 1, S::Run(1)), obs(300, 1, S::Run(1)), obs(300, 2, S::Run(2)), obs(600, 2, S::Sus(2))];
        let iv = reconstruct_intervals(&o, params(600)).unwrap();
        let curve = concurrency_curve(&iv, june(2));
        // Brute-force per-second count.
        let per_second = |sec: i64| {
            let t = base() + Duration::seconds(sec);
            iv.iter()
                .flat_map(|i| i.segments())
                .filter(|s| s.start <= t && t < s.end)
                .fold((0, 0), |(r, s), seg| match seg.phase {
                    JobPhase::Running => (r + 1, s),
                    JobPhase::Suspended => (r, s + 1),
                })
        };
        for sec in 0..1200 {
            let t = base() + Duration::seconds(sec);
            let step = curve.iter().rev().find(|s| s.t <= t).unwrap();
            assert_eq!((step.running_count, step.suspended_count), per_second(sec), "second {sec}");
        }
        assert!(curve.iter().any(|s| s.running_count == 2));
    }

    #[test]
    fn coverage_reports_gaps() {
        let o = vec![obs(0, 1, S::Idle), obs(300, 1, S::Idle), obs(1200, 1, S::Idle)];
        let c = sample_coverage(&o, june(2), params(600));
        assert_eq!(c.observed_ticks, 3);
        assert_eq!(c.expected_ticks, 288);
        assert_eq!(c.observed_s, 900);
        assert_eq!(c.unobserved[0], (base() + Duration::seconds(600), base() + Duration::seconds(1200)));
    }

    #[test]
    fn month_lengths() {
        assert_eq!(days_in_month(june(5)), 30);
        assert_eq!(days_in_month(NaiveDate::from_ymd_opt(2014, 2, 1).unwrap()), 28);
        assert_eq!(days_in_month(NaiveDate::from_ymd_opt(2016, 2, 10).unwrap()), 29);
        assert_eq!(Span::Month.days_from(june(5)), 30);
        assert_eq!(Span::Week.days_from(june(5)), 7);
    }

    fn arb_stream() -> impl Strategy<Value = Vec<SlotObservation>> {
        // Ticks on a 60 s grid so that irregular spacing and gaps both occur.
        prop::collection::vec((0i64..240, 1u32..3, 0u8..6), 0..60).prop_map(|raw| {
            let mut v: Vec<_> = raw
                .into_iter()
                .map(|(tick, slot, k)| {
                    let s = match k {
                        0 => S::Idle,
                        1 | 2 => S::Run(u64::from(k % 2) + 1),
                        3 => S::Run(1),
                        4 => S::Sus(1),
                        _ => S::Sus(2),
                    };
                    obs(tick * 60, slot, s)
                })
                .collect();
            v.sort_by_key(SlotObservation::order_key);
            v
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn reconstruction_matches_per_second_oracle(o in arb_stream(), gap_mult in 1u32..4) {
            let gap = DELTA as u32 * gap_mult;
            let got = flatten(&reconstruct_intervals(&o, params(gap)).unwrap());
            prop_assert_eq!(got, oracle(&o, DELTA, i64::from(gap)));
        }

        #[test]
        fn curve_integral_equals_running_time(o in arb_stream()) {
            let iv = reconstruct_intervals(&o, params(600)).unwrap();
            let clipped = clip_to_day(&iv, june(2));
            let summary = day_summary(&clipped, "epico", 2, june(2)).unwrap();
            let curve = concurrency_curve(&clipped, june(2));
            let mut integral_r = 0i64;
            let mut integral_s = 0i64;
            for (i, step) in curve.iter().enumerate() {
                let next = curve.get(i + 1).map(|s| s.t).unwrap_or(day_end(june(2)));
                integral_r += i64::from(step.running_count) * (next - step.t).num_seconds();
                integral_s += i64::from(step.suspended_count) * (next - step.t).num_seconds();
                prop_assert!(step.running_count + step.suspended_count <= 2);
            }
            prop_assert_eq!(integral_r as u64, summary.running_s());
            prop_assert_eq!(integral_s as u64, summary.suspended_s());
        }
    }
}
