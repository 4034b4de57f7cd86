//! Domain types shared by every part of the stack.
//!
//! All values are immutable once built. Types whose invariants span several
//! fields (observations, machine records, intervals, summaries) are only
//! constructible through validating constructors.

mod schedule;
mod summary;

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Timelike, Utc};
use serde::{Serialize, Serializer};
use thiserror::Error;

pub use schedule::{schedule_allows, ScheduleParseError, ScheduleWindows, TimeOfDay, Window};
pub use summary::{
    DailySummary, PeriodSummary, QueueCounts, QueueRow, QueueSummary, SummaryRow, UsageFigures,
    UsageTotals,
};

/// UTC instant with whole-second resolution.
pub type Timestamp = DateTime<Utc>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid name {0:?}")]
    InvalidName(String),
    #[error("invalid job id {0:?}, expected <cluster>.<proc>")]
    InvalidJobId(String),
    #[error("timestamp {0} has sub-second precision")]
    SubSecondTimestamp(Timestamp),
    #[error("slot index must be >= 1")]
    ZeroSlot,
    #[error("slot count must be >= 1")]
    ZeroSlotCount,
    #[error("job id and owner must be present exactly when the slot is Claimed")]
    JobPresence,
    #[error("per-slot list {field} has length {len}, expected {slot_count}")]
    PerSlotLength {
        field: &'static str,
        len: usize,
        slot_count: u32,
    },
    #[error("condor load {condor} exceeds total load {total} beyond jitter allowance")]
    CondorLoadExceedsTotal { condor: Load, total: Load },
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
    #[error("invalid summary: {0}")]
    InvalidSummary(String),
}

/// Checks a free-text identifier (machine, user, OS string) for characters
/// that would break the record format.
pub fn validate_text(s: &str) -> Result<(), ModelError> {
    if s.is_empty() || s.chars().any(|c| c == '|' || c == '\n' || c == '\r') {
        return Err(ModelError::InvalidName(s.to_string()));
    }
    Ok(())
}

/// Machine names double as file names in the data root, so path separators
/// and registry/list delimiters are excluded on top of the record rules.
pub fn validate_machine_name(s: &str) -> Result<(), ModelError> {
    validate_text(s)?;
    if s == "." || s == ".." || s.starts_with('.') || s.contains(['/', '\\', ',', ';', '\0']) {
        return Err(ModelError::InvalidName(s.to_string()));
    }
    Ok(())
}

/// OS strings are free text but may be empty (an unknown OS).
fn validate_optional_text(s: &str) -> Result<(), ModelError> {
    if s.chars().any(|c| c == '|' || c == '\n' || c == '\r') {
        return Err(ModelError::InvalidName(s.to_string()));
    }
    Ok(())
}

fn check_whole_second(t: Timestamp) -> Result<(), ModelError> {
    if t.nanosecond() != 0 {
        return Err(ModelError::SubSecondTimestamp(t));
    }
    Ok(())
}

macro_rules! wire_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => stringify!($variant)),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = UnknownToken;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $(stringify!($variant) => Ok($name::$variant),)+
                    _ => Err(UnknownToken(s.to_string())),
                }
            }
        }
    };
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown token {0:?}")]
pub struct UnknownToken(pub String);

wire_enum!(
    /// Scheduler-reported slot state.
    SlotState {
        Owner,
        Claimed,
        Unclaimed,
        Matched,
        Preempting,
        Drained,
    }
);

wire_enum!(
    /// Scheduler-reported slot activity.
    SlotActivity {
        Busy,
        Suspended,
        Idle,
        Benchmarking,
        Retiring,
        Vacating,
    }
);

wire_enum!(
    /// Phase of a job occupying a slot.
    JobPhase { Running, Suspended }
);

wire_enum!(
    /// Colour class used by the panoramic grid.
    DisplayClass {
        OwnerBlue,
        RunningRed,
        IdleGreen,
        SuspendedAmber,
        OtherGray,
    }
);

pub fn slot_display_class(state: SlotState, activity: SlotActivity) -> DisplayClass {
    use SlotActivity as A;
    use SlotState as S;
    match (state, activity) {
        (S::Claimed, A::Busy) => DisplayClass::RunningRed,
        (S::Claimed, A::Suspended) => DisplayClass::SuspendedAmber,
        (S::Owner, _) => DisplayClass::OwnerBlue,
        (S::Unclaimed, A::Idle) => DisplayClass::IdleGreen,
        _ => DisplayClass::OtherGray,
    }
}

/// Only Claimed slots that are busy or suspended carry a job phase.
pub fn job_phase(state: SlotState, activity: SlotActivity) -> Option<JobPhase> {
    match (state, activity) {
        (SlotState::Claimed, SlotActivity::Busy) => Some(JobPhase::Running),
        (SlotState::Claimed, SlotActivity::Suspended) => Some(JobPhase::Suspended),
        _ => None,
    }
}

/// Non-negative load average stored in hundredths, so that the two-decimal
/// wire form round-trips exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Load(u32);

impl Load {
    pub const fn from_hundredths(h: u32) -> Self {
        Load(h)
    }

    pub fn hundredths(self) -> u32 {
        self.0
    }

    /// Nearest representable load; negative and non-finite inputs clamp to zero.
    pub fn from_f64(v: f64) -> Self {
        if !v.is_finite() || v <= 0.0 {
            return Load(0);
        }
        Load((v * 100.0).round().min(u32::MAX as f64) as u32)
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 100.0
    }
}

impl fmt::Display for Load {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

impl FromStr for Load {
    type Err = UnknownToken;

    /// Accepts `<digits>` or `<digits>.<1-2 digits>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || UnknownToken(s.to_string());
        let (int, frac) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int.is_empty()
            || int.len() > 7
            || !int.bytes().all(|b| b.is_ascii_digit())
            || frac.len() > 2
            || !frac.bytes().all(|b| b.is_ascii_digit())
            || (s.contains('.') && frac.is_empty())
        {
            return Err(bad());
        }
        let int: u32 = int.parse().map_err(|_| bad())?;
        let frac: u32 = match frac.len() {
            0 => 0,
            1 => frac.parse::<u32>().map_err(|_| bad())? * 10,
            _ => frac.parse().map_err(|_| bad())?,
        };
        Ok(Load(int * 100 + frac))
    }
}

impl Serialize for Load {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

/// Scheduler job identifier of the form `<cluster>.<proc>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct JobId(String);

impl JobId {
    pub fn new(cluster: u64, proc_: u64) -> Self {
        JobId(format!("{cluster}.{proc_}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn is_canonical_uint(s: &str) -> bool {
    !s.is_empty()
        && s.len() <= 19
        && s.bytes().all(|b| b.is_ascii_digit())
        && (s == "0" || !s.starts_with('0'))
}

impl FromStr for JobId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('.') {
            Some((c, p)) if is_canonical_uint(c) && is_canonical_uint(p) => Ok(JobId(s.to_string())),
            _ => Err(ModelError::InvalidJobId(s.to_string())),
        }
    }
}

/// Job currently occupying a claimed slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct JobRef {
    pub job_id: JobId,
    pub owner: String,
}

/// One sampled fact about one slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SlotObservation {
    timestamp: Timestamp,
    machine: String,
    slot: u32,
    state: SlotState,
    activity: SlotActivity,
    load: Load,
    #[serde(flatten)]
    job: Option<JobRef>,
}

impl SlotObservation {
    pub fn new(
        timestamp: Timestamp,
        machine: impl Into<String>,
        slot: u32,
        state: SlotState,
        activity: SlotActivity,
        load: Load,
        job: Option<JobRef>,
    ) -> Result<Self, ModelError> {
        let machine = machine.into();
        check_whole_second(timestamp)?;
        validate_machine_name(&machine)?;
        if slot == 0 {
            return Err(ModelError::ZeroSlot);
        }
        if (state == SlotState::Claimed) != job.is_some() {
            return Err(ModelError::JobPresence);
        }
        if let Some(job) = &job {
            validate_text(&job.owner)?;
        }
        Ok(SlotObservation {
            timestamp,
            machine,
            slot,
            state,
            activity,
            load,
            job,
        })
    }

    pub fn timestamp(&self) -> Timestamp {
        self.timestamp
    }
    pub fn machine(&self) -> &str {
        &self.machine
    }
    pub fn slot(&self) -> u32 {
        self.slot
    }
    pub fn state(&self) -> SlotState {
        self.state
    }
    pub fn activity(&self) -> SlotActivity {
        self.activity
    }
    pub fn load(&self) -> Load {
        self.load
    }
    pub fn job(&self) -> Option<&JobRef> {
        self.job.as_ref()
    }
    pub fn job_id(&self) -> Option<&JobId> {
        self.job.as_ref().map(|j| &j.job_id)
    }
    pub fn owner(&self) -> Option<&str> {
        self.job.as_ref().map(|j| j.owner.as_str())
    }
    pub fn phase(&self) -> Option<JobPhase> {
        job_phase(self.state, self.activity)
    }
    pub fn display_class(&self) -> DisplayClass {
        slot_display_class(self.state, self.activity)
    }

    /// Same observation stamped at a different instant.
    pub fn with_timestamp(&self, timestamp: Timestamp) -> Result<Self, ModelError> {
        check_whole_second(timestamp)?;
        Ok(SlotObservation {
            timestamp,
            ..self.clone()
        })
    }

    /// Sort key used everywhere observations are ordered.
    pub fn order_key(&self) -> (Timestamp, u32) {
        (self.timestamp, self.slot)
    }
}

/// Machine-level attributes as sampled by the status source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MachineAttributes {
    pub slot_count: u32,
    pub os_name: String,
    pub os_version: String,
    pub memory_mb_total: u64,
    pub memory_mb_per_slot: Vec<u64>,
    pub disk_mb_free_total: u64,
    pub disk_mb_free_per_slot: Vec<u64>,
    pub load_avg_total: Load,
    pub load_avg_condor: Load,
}

impl MachineAttributes {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.slot_count == 0 {
            return Err(ModelError::ZeroSlotCount);
        }
        validate_optional_text(&self.os_name)?;
        validate_optional_text(&self.os_version)?;
        for (field, len) in [
            ("memory_mb_per_slot", self.memory_mb_per_slot.len()),
            ("disk_mb_free_per_slot", self.disk_mb_free_per_slot.len()),
        ] {
            if len != self.slot_count as usize {
                return Err(ModelError::PerSlotLength {
                    field,
                    len,
                    slot_count: self.slot_count,
                });
            }
        }
        if self.load_avg_condor.hundredths() > self.load_avg_total.hundredths() + 1 {
            return Err(ModelError::CondorLoadExceedsTotal {
                condor: self.load_avg_condor,
                total: self.load_avg_total,
            });
        }
        Ok(())
    }

    /// Placeholder attributes for a registered machine that did not report.
    pub fn unknown(slot_count: u32) -> Self {
        let n = slot_count as usize;
        MachineAttributes {
            slot_count,
            os_name: String::new(),
            os_version: String::new(),
            memory_mb_total: 0,
            memory_mb_per_slot: vec![0; n],
            disk_mb_free_total: 0,
            disk_mb_free_per_slot: vec![0; n],
            load_avg_total: Load::default(),
            load_avg_condor: Load::default(),
        }
    }
}

/// The `M` record: machine attributes sampled at one instant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MachineRecord {
    timestamp: Timestamp,
    machine: String,
    #[serde(flatten)]
    attributes: MachineAttributes,
}

impl MachineRecord {
    pub fn new(
        timestamp: Timestamp,
        machine: impl Into<String>,
        attributes: MachineAttributes,
    ) -> Result<Self, ModelError> {
        let machine = machine.into();
        check_whole_second(timestamp)?;
        validate_machine_name(&machine)?;
        attributes.validate()?;
        Ok(MachineRecord {
            timestamp,
            machine,
            attributes,
        })
    }

    pub fn timestamp(&self) -> Timestamp {
        self.timestamp
    }
    pub fn machine(&self) -> &str {
        &self.machine
    }
    pub fn attributes(&self) -> &MachineAttributes {
        &self.attributes
    }

    pub fn with_timestamp(&self, timestamp: Timestamp) -> Result<Self, ModelError> {
        check_whole_second(timestamp)?;
        Ok(MachineRecord {
            timestamp,
            ..self.clone()
        })
    }
}

/// Everything the live view knows about a machine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MachineInfo {
    pub machine: String,
    #[serde(flatten)]
    pub attributes: MachineAttributes,
    pub restriction: Option<ScheduleWindows>,
    pub last_job_time: Option<Timestamp>,
    pub reachable: bool,
}

/// A reconstructed phase segment of a job interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Segment {
    pub phase: JobPhase,
    pub start: Timestamp,
    pub end: Timestamp,
}

impl Segment {
    pub fn duration_s(&self) -> i64 {
        (self.end - self.start).num_seconds()
    }
}

/// A contiguous occupation of one slot by one job.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct JobInterval {
    machine: String,
    slot: u32,
    job_id: JobId,
    owner: String,
    start: Timestamp,
    end: Timestamp,
    segments: Vec<Segment>,
}

impl JobInterval {
    /// Builds an interval from its segments; start and end are taken from the
    /// first and last segment.
    pub fn new(
        machine: impl Into<String>,
        slot: u32,
        job_id: JobId,
        owner: impl Into<String>,
        segments: Vec<Segment>,
    ) -> Result<Self, ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidInterval(m.to_string()));
        let (Some(first), Some(last)) = (segments.first(), segments.last()) else {
            return bad("no segments");
        };
        for s in &segments {
            if s.start >= s.end {
                return bad("empty or inverted segment");
            }
        }
        for w in segments.windows(2) {
            if w[0].end != w[1].start {
                return bad("segments do not tile the interval");
            }
            if w[0].phase == w[1].phase {
                return bad("adjacent segments share a phase");
            }
        }
        let interval = JobInterval {
            machine: machine.into(),
            slot,
            job_id,
            owner: owner.into(),
            start: first.start,
            end: last.end,
            segments,
        };
        validate_machine_name(&interval.machine)?;
        validate_text(&interval.owner)?;
        if slot == 0 {
            return Err(ModelError::ZeroSlot);
        }
        Ok(interval)
    }

    pub fn machine(&self) -> &str {
        &self.machine
    }
    pub fn slot(&self) -> u32 {
        self.slot
    }
    pub fn job_id(&self) -> &JobId {
        &self.job_id
    }
    pub fn owner(&self) -> &str {
        &self.owner
    }
    pub fn start(&self) -> Timestamp {
        self.start
    }
    pub fn end(&self) -> Timestamp {
        self.end
    }
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }
    pub fn duration_s(&self) -> i64 {
        (self.end - self.start).num_seconds()
    }

    /// Total seconds spent in `phase`.
    pub fn phase_s(&self, phase: JobPhase) -> i64 {
        self.segments
            .iter()
            .filter(|s| s.phase == phase)
            .map(Segment::duration_s)
            .sum()
    }

    /// Portion of the interval inside `[from, to)`, if any.
    pub fn clip(&self, from: Timestamp, to: Timestamp) -> Option<JobInterval> {
        let segments: Vec<Segment> = self
            .segments
            .iter()
            .filter_map(|s| {
                let start = s.start.max(from);
                let end = s.end.min(to);
                (start < end).then_some(Segment {
                    phase: s.phase,
                    start,
                    end,
                })
            })
            .collect();
        if segments.is_empty() {
            return None;
        }
        Some(JobInterval {
            start: segments[0].start,
            end: segments[segments.len() - 1].end,
            segments,
            ..self.clone()
        })
    }
}

/// One registered machine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RegistryEntry {
    pub machine: String,
    pub slot_count: u32,
    pub restriction: Option<ScheduleWindows>,
}

/// Every machine belonging to the pool, active or not.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
#[serde(transparent)]
pub struct MachineRegistry {
    entries: Vec<RegistryEntry>,
}

impl MachineRegistry {
    /// Rejects duplicate or invalid names and zero slot counts.
    pub fn new(entries: Vec<RegistryEntry>) -> Result<Self, ModelError> {
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            validate_machine_name(&e.machine)?;
            if e.slot_count == 0 {
                return Err(ModelError::ZeroSlotCount);
            }
            if !seen.insert(e.machine.as_str()) {
                return Err(ModelError::InvalidName(format!("duplicate machine {}", e.machine)));
            }
        }
        Ok(MachineRegistry { entries })
    }

    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }

    pub fn get(&self, machine: &str) -> Option<&RegistryEntry> {
        self.entries.iter().find(|e| e.machine == machine)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
}

/// Live status of one machine: attributes plus its slots, ordered by slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MachineStatus {
    pub info: MachineInfo,
    pub slots: Vec<SlotObservation>,
    /// Seconds each slot has spent in its current state, parallel to `slots`.
    pub time_in_state_s: Vec<u64>,
}

/// The whole pool at one instant. Machines are ordered by name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PoolSnapshot {
    pub taken_at: Timestamp,
    pub machines: Vec<MachineStatus>,
    pub queue: QueueSummary,
}

impl PoolSnapshot {
    pub fn machine(&self, name: &str) -> Option<&MachineStatus> {
        self.machines.iter().find(|m| m.info.machine == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn t0() -> Timestamp {
        Utc.with_ymd_and_hms(2014, 6, 2, 10, 5, 0).unwrap()
    }

    #[test]
    fn display_class_table() {
        use SlotActivity as A;
        use SlotState as S;
        assert_eq!(slot_display_class(S::Claimed, A::Busy), DisplayClass::RunningRed);
        assert_eq!(slot_display_class(S::Owner, A::Idle), DisplayClass::OwnerBlue);
        assert_eq!(slot_display_class(S::Drained, A::Retiring), DisplayClass::OtherGray);
        assert_eq!(
            slot_display_class(S::Claimed, A::Suspended),
            DisplayClass::SuspendedAmber
        );
        assert_eq!(slot_display_class(S::Unclaimed, A::Idle), DisplayClass::IdleGreen);
        assert_eq!(slot_display_class(S::Unclaimed, A::Benchmarking), DisplayClass::OtherGray);
        assert_eq!(slot_display_class(S::Owner, A::Busy), DisplayClass::OwnerBlue);
    }

    #[test]
    fn job_phase_examples() {
        assert_eq!(
            job_phase(SlotState::Claimed, SlotActivity::Busy),
            Some(JobPhase::Running)
        );
        assert_eq!(job_phase(SlotState::Unclaimed, SlotActivity::Idle), None);
        assert_eq!(
            job_phase(SlotState::Claimed, SlotActivity::Suspended),
            Some(JobPhase::Suspended)
        );
        assert_eq!(job_phase(SlotState::Claimed, SlotActivity::Idle), None);
    }

    #[test]
    fn phase_and_class_agree_on_every_pair() {
        for &s in SlotState::ALL {
            for &a in SlotActivity::ALL {
                let class = slot_display_class(s, a);
                let phase = job_phase(s, a);
                assert_eq!(phase == Some(JobPhase::Running), class == DisplayClass::RunningRed);
                assert_eq!(
                    phase == Some(JobPhase::Suspended),
                    class == DisplayClass::SuspendedAmber
                );
            }
        }
    }

    #[test]
    fn unknown_tokens_rejected() {
        assert!("claimed".parse::<SlotState>().is_err());
        assert!("".parse::<SlotActivity>().is_err());
        assert_eq!("Drained".parse::<SlotState>().unwrap(), SlotState::Drained);
    }

    #[test]
    fn load_formatting() {
        assert_eq!(Load::from_f64(0.5).to_string(), "0.50");
        assert_eq!(Load::from_hundredths(1234).to_string(), "12.34");
        assert_eq!("1.0".parse::<Load>().unwrap(), Load::from_hundredths(100));
        assert_eq!("3".parse::<Load>().unwrap(), Load::from_hundredths(300));
        for bad in ["", ".5", "1.", "1.234", "-1", "1e3", "1,5", " 1"] {
            assert!(bad.parse::<Load>().is_err(), "{bad}");
        }
    }

    #[test]
    fn job_id_grammar() {
        assert!("1234.0".parse::<JobId>().is_ok());
        for bad in ["1234", "a.0", "1.", ".1", "01.0", "1.0.0", ""] {
            assert!(bad.parse::<JobId>().is_err(), "{bad}");
        }
    }

    #[test]
    fn observation_invariants() {
        let job = JobRef {
            job_id: "12.0".parse().unwrap(),
            owner: "alice".into(),
        };
        let l = Load::default();
        assert!(SlotObservation::new(t0(), "epico", 1, SlotState::Claimed, SlotActivity::Busy, l, Some(job.clone())).is_ok());
        assert_eq!(
            SlotObservation::new(t0(), "epico", 1, SlotState::Claimed, SlotActivity::Busy, l, None),
            Err(ModelError::JobPresence)
        );
        assert_eq!(
            SlotObservation::new(t0(), "epico", 1, SlotState::Owner, SlotActivity::Idle, l, Some(job.clone())),
            Err(ModelError::JobPresence)
        );
        assert!(matches!(
            SlotObservation::new(t0(), "ep|ico", 1, SlotState::Owner, SlotActivity::Idle, l, None),
            Err(ModelError::InvalidName(_))
        ));
        assert_eq!(
            SlotObservation::new(t0(), "epico", 0, SlotState::Owner, SlotActivity::Idle, l, None),
            Err(ModelError::ZeroSlot)
        );
        let frac = t0() + chrono::Duration::milliseconds(5);
        assert!(SlotObservation::new(frac, "epico", 1, SlotState::Owner, SlotActivity::Idle, l, None).is_err());
    }

    #[test]
    fn machine_attributes_invariants() {
        let mut a = MachineAttributes::unknown(2);
        assert!(a.validate().is_ok());
        a.memory_mb_per_slot.pop();
        assert!(matches!(a.validate(), Err(ModelError::PerSlotLength { .. })));
        let mut a = MachineAttributes::unknown(2);
        a.load_avg_total = Load::from_hundredths(100);
        a.load_avg_condor = Load::from_hundredths(101);
        assert!(a.validate().is_ok());
        a.load_avg_condor = Load::from_hundredths(102);
        assert!(a.validate().is_err());
    }

    #[test]
    fn interval_tiling_rules() {
        let s = |p, a: i64, b: i64| Segment {
            phase: p,
            start: t0() + chrono::Duration::seconds(a),
            end: t0() + chrono::Duration::seconds(b),
        };
        let id: JobId = "1.0".parse().unwrap();
        use JobPhase::*;
        let ok = JobInterval::new("m", 1, id.clone(), "u", vec![s(Running, 0, 10), s(Suspended, 10, 20)]).unwrap();
        assert_eq!(ok.duration_s(), 20);
        assert_eq!(ok.phase_s(Suspended), 10);
        assert!(JobInterval::new("m", 1, id.clone(), "u", vec![s(Running, 0, 10), s(Running, 10, 20)]).is_err());
        assert!(JobInterval::new("m", 1, id.clone(), "u", vec![s(Running, 0, 10), s(Suspended, 11, 20)]).is_err());
        assert!(JobInterval::new("m", 1, id.clone(), "u", vec![]).is_err());
        let clipped = ok.clip(t0() + chrono::Duration::seconds(5), t0() + chrono::Duration::seconds(12)).unwrap();
        assert_eq!(clipped.duration_s(), 7);
        assert_eq!(clipped.phase_s(Running), 5);
        assert!(ok.clip(t0() + chrono::Duration::seconds(20), t0() + chrono::Duration::seconds(30)).is_none());
    }
}
