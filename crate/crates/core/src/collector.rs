//! Polling driver: samples a status source on aligned ticks and appends the
//! records to the data root.

use std::path::PathBuf;

use chrono::{FixedOffset, TimeDelta};
use serde::Serialize;
use thiserror::Error;

use crate::clock::{Clock, StopSignal};
use crate::model::{MachineRecord, MachineRegistry, ModelError, RegistryEntry, Timestamp};
use crate::record::{parse_status_output, Record};
use crate::source::{SourceError, SourceSpec, StatusSource};
use crate::storage::{DataRoot, StorageError};

pub const DEFAULT_INTERVAL_S: u32 = 300;
pub const MIN_INTERVAL_S: u32 = 30;
pub const MAX_INTERVAL_S: u32 = 3600;
pub const DEFAULT_LOOKBACK_DAYS: u32 = 31;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("interval {0} s is outside {MIN_INTERVAL_S}..={MAX_INTERVAL_S}")]
    Interval(u32),
    #[error("lookback must be at least one day")]
    Lookback,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectorConfig {
    pub interval_s: u32,
    pub source: SourceSpec,
    pub data_root: PathBuf,
    /// Days scanned backwards when looking for a machine's last job.
    pub lookback_days: u32,
    /// Offset used to evaluate execution restrictions.
    pub time_zone: FixedOffset,
}

impl CollectorConfig {
    pub fn new(source: SourceSpec, data_root: impl Into<PathBuf>) -> Self {
        CollectorConfig {
            interval_s: DEFAULT_INTERVAL_S,
            source,
            data_root: data_root.into(),
            lookback_days: DEFAULT_LOOKBACK_DAYS,
            time_zone: FixedOffset::east_opt(0).expect("UTC offset"),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(MIN_INTERVAL_S..=MAX_INTERVAL_S).contains(&self.interval_s) {
            return Err(ConfigError::Interval(self.interval_s));
        }
        if self.lookback_days == 0 {
            return Err(ConfigError::Lookback);
        }
        Ok(())
    }
}

/// Why a poll cycle produced fewer records than expected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Error)]
pub enum PollError {
    #[error("source unavailable: {0}")]
    SourceUnavailable(String),
    #[error("malformed source output: {0}")]
    MalformedOutput(String),
    #[error("write failed, cycle aborted: {0}")]
    IoFailure(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PollReport {
    pub tick: Timestamp,
    pub machines_seen: usize,
    pub slots_written: usize,
    pub machine_records_written: usize,
    pub errors: Vec<PollError>,
}

/// Fetches one status listing and appends it stamped at `now`, truncated to
/// the second. Queue output is not stored. Every failure ends up in the
/// report; nothing is written when the listing cannot be parsed.
pub fn poll_once(source: &dyn StatusSource, root: &DataRoot, now: Timestamp) -> PollReport {
    let tick = now - TimeDelta::nanoseconds(i64::from(now.timestamp_subsec_nanos()));
    let mut report = PollReport {
        tick,
        machines_seen: 0,
        slots_written: 0,
        machine_records_written: 0,
        errors: Vec::new(),
    };
    let text = match source.fetch_status(tick) {
        Ok(t) => t,
        Err(SourceError(e)) => {
            report.errors.push(PollError::SourceUnavailable(e));
            return report;
        }
    };
    let snapshot = match parse_status_output(&text, tick, &MachineRegistry::default()) {
        Ok(s) => s,
        Err(e) => {
            report.errors.push(PollError::MalformedOutput(e.to_string()));
            return report;
        }
    };
    let mut records = Vec::new();
    for m in snapshot.machines {
        let machine = m.info.machine.clone();
        match MachineRecord::new(tick, machine, m.info.attributes) {
            Ok(r) => records.push(Record::Machine(r)),
            Err(e) => {
                report.errors.push(PollError::MalformedOutput(e.to_string()));
                return report;
            }
        }
        report.slots_written += m.slots.len();
        records.extend(m.slots.into_iter().map(Record::Slot));
    }
    report.machines_seen = records.iter().filter(|r| matches!(r, Record::Machine(_))).count();
    match root.append_observations(&records) {
        Ok(_) => report.machine_records_written = report.machines_seen,
        Err(e) => {
            report.slots_written = 0;
            report.errors.push(PollError::IoFailure(e.to_string()));
        }
    }
    report
}

/// First aligned tick at or after `t`.
pub fn next_tick(t: Timestamp, interval_s: u32) -> Timestamp {
    let i = i64::from(interval_s);
    let secs = t.timestamp() + i64::from(t.timestamp_subsec_nanos() > 0);
    let aligned = secs.div_euclid(i) * i;
    let aligned = if aligned < secs { aligned + i } else { aligned };
    chrono::DateTime::from_timestamp(aligned, 0).expect("tick within chrono range")
}

/// Polls at every tick aligned to `interval_s` until `stop` is raised.
/// A cycle that overruns its interval skips the missed ticks. Returns the
/// number of cycles run.
pub fn run_loop(
    interval_s: u32,
    source: &dyn StatusSource,
    root: &DataRoot,
    clock: &dyn Clock,
    stop: &StopSignal,
    mut on_report: impl FnMut(&PollReport),
) -> usize {
    let mut last: Option<Timestamp> = None;
    let mut cycles = 0;
    loop {
        let mut tick = next_tick(clock.now(), interval_s);
        if let Some(prev) = last {
            tick = tick.max(prev + TimeDelta::seconds(i64::from(interval_s)));
        }
        if !clock.sleep_until(tick, stop) {
            return cycles;
        }
        let report = poll_once(source, root, tick);
        cycles += 1;
        last = Some(tick);
        on_report(&report);
    }
}

#[derive(Debug, Error)]
pub enum RegistryBuildError {
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error("malformed source output: {0}")]
    Malformed(String),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Rebuilds the registry from the machines currently reported by the source,
/// keeping every machine and restriction of the existing registry, and saves
/// it. Slot counts follow the source.
pub fn build_machine_registry(
    source: &dyn StatusSource,
    root: &DataRoot,
    now: Timestamp,
) -> Result<MachineRegistry, RegistryBuildError> {
    let text = source.fetch_status(now)?;
    let snapshot = parse_status_output(&text, now, &MachineRegistry::default())
        .map_err(|e| RegistryBuildError::Malformed(e.to_string()))?;
    let existing = root.load_registry_or_empty()?;
    let mut entries: Vec<RegistryEntry> = existing.entries().to_vec();
    for m in &snapshot.machines {
        let slot_count = m.info.attributes.slot_count;
        match entries.iter_mut().find(|e| e.machine == m.info.machine) {
            Some(e) => e.slot_count = slot_count,
            None => entries.push(RegistryEntry {
                machine: m.info.machine.clone(),
                slot_count,
                restriction: None,
            }),
        }
    }
    entries.sort_by(|a, b| a.machine.cmp(&b.machine));
    let registry = MachineRegistry::new(entries)?;
    root.save_registry(&registry)?;
    Ok(registry)
}
