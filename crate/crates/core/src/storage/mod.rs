//! Append-only flat-file data root.
//!
//! ```text
//! <root>/machines.reg
//! <root>/<YYYY>/<MM>/<DD>/<machine>.rec
//! ```
//!
//! Every file starts with [`FORMAT_HEADER`]. A day file only ever holds
//! records of its machine stamped within its UTC day. Nothing derived is
//! ever written here.

mod lock;
mod registry;

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use thiserror::Error;

use crate::model::{validate_machine_name, MachineRecord, ModelError, SlotObservation, Timestamp};
use crate::record::{check_header, parse_record_line, render_record_line, MalformedRecord, Record, FORMAT_HEADER};

pub use lock::WriterLock;
pub use registry::{parse_registry, render_registry};

pub const REGISTRY_FILE: &str = "machines.reg";
pub const RECORD_EXT: &str = "rec";
pub const MAX_SPAN_DAYS: u32 = 366;

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("record for {machine} at {timestamp} does not belong in {date}/{expected}")]
    Routing {
        date: NaiveDate,
        expected: String,
        machine: String,
        timestamp: Timestamp,
    },
    #[error("{path}:{line}: {source}")]
    Malformed {
        path: PathBuf,
        line: usize,
        #[source]
        source: MalformedRecord,
    },
    #[error("{path}: {source}")]
    UnsupportedVersion {
        path: PathBuf,
        #[source]
        source: MalformedRecord,
    },
    #[error("machine registry not found at {0}")]
    RegistryMissing(PathBuf),
    #[error("span of {0} days is outside 1..={MAX_SPAN_DAYS}")]
    InvalidSpan(u32),
    #[error("data root {0} is locked by another writer")]
    Locked(PathBuf),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl StorageError {
    fn io(path: &Path) -> impl FnOnce(io::Error) -> StorageError + '_ {
        move |source| StorageError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// How corrupt lines are handled on read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReadMode {
    /// Any corrupt line is an error.
    Strict,
    /// Corrupt lines are skipped and counted.
    #[default]
    Lenient,
}

/// Contents of one machine-day file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DayRead {
    /// Slot observations sorted by `(timestamp, slot)`.
    pub observations: Vec<SlotObservation>,
    /// Machine records in file order.
    pub machine_records: Vec<MachineRecord>,
    pub corrupt_lines: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RangeRead {
    pub days: Vec<(NaiveDate, Vec<SlotObservation>)>,
    pub corrupt_lines: usize,
}

/// Handle on a data root directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataRoot {
    path: PathBuf,
}

impl DataRoot {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        DataRoot { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn day_dir(&self, date: NaiveDate) -> PathBuf {
        self.path
            .join(date.format("%Y").to_string())
            .join(date.format("%m").to_string())
            .join(date.format("%d").to_string())
    }

    pub fn machine_file(&self, date: NaiveDate, machine: &str) -> PathBuf {
        self.day_dir(date).join(format!("{machine}.{RECORD_EXT}"))
    }

    pub fn registry_path(&self) -> PathBuf {
        self.path.join(REGISTRY_FILE)
    }

    /// Routes records to their `(day, machine)` files and appends them.
    /// Returns the number of records written.
    pub fn append_observations(&self, records: &[Record]) -> Result<usize, StorageError> {
        let mut groups: BTreeMap<(NaiveDate, &str), Vec<&Record>> = BTreeMap::new();
        for r in records {
            groups
                .entry((r.timestamp().date_naive(), r.machine()))
                .or_default()
                .push(r);
        }
        let mut written = 0;
        for ((date, machine), group) in groups {
            written += self.append_machine_day(date, machine, group)?;
        }
        Ok(written)
    }

    /// Appends records to a single machine-day file in one write. Every
    /// record must belong to `machine` and fall within `date`.
    pub fn append_machine_day<'a>(
        &self,
        date: NaiveDate,
        machine: &str,
        records: impl IntoIterator<Item = &'a Record>,
    ) -> Result<usize, StorageError> {
        validate_machine_name(machine)?;
        let mut buf = String::new();
        let mut count = 0;
        for r in records {
            if r.machine() != machine || r.timestamp().date_naive() != date {
                return Err(StorageError::Routing {
                    date,
                    expected: machine.to_string(),
                    machine: r.machine().to_string(),
                    timestamp: r.timestamp(),
                });
            }
            buf.push_str(&render_record_line(r));
            buf.push('\n');
            count += 1;
        }
        if count == 0 {
            return Ok(0);
        }
        let dir = self.day_dir(date);
        fs::create_dir_all(&dir).map_err(StorageError::io(&dir))?;
        let path = self.machine_file(date, machine);
        let mut file = OpenOptions::new()
            .append(true)
            .create(true)
            .open(&path)
            .map_err(StorageError::io(&path))?;
        let len = file.metadata().map_err(StorageError::io(&path))?.len();
        if len == 0 {
            buf.insert_str(0, &format!("{FORMAT_HEADER}\n"));
        }
        file.write_all(buf.as_bytes()).map_err(StorageError::io(&path))?;
        Ok(count)
    }

    /// Reads every complete record of a machine-day file. A missing file
    /// reads as empty; a trailing line without its newline is ignored.
    pub fn read_day_records(
        &self,
        machine: &str,
        date: NaiveDate,
        mode: ReadMode,
    ) -> Result<DayRead, StorageError> {
        validate_machine_name(machine)?;
        let path = self.machine_file(date, machine);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(DayRead::default()),
            Err(e) => return Err(StorageError::io(&path)(e)),
        };
        let mut out = DayRead::default();
        let mut pieces: Vec<&[u8]> = bytes.split(|&b| b == b'\n').collect();
        // The final piece is either empty or a partially written line.
        pieces.pop();

        for (idx, raw) in pieces.into_iter().enumerate() {
            let lineno = idx + 1;
            let malformed = |source| StorageError::Malformed {
                path: path.clone(),
                line: lineno,
                source,
            };
            let line = match std::str::from_utf8(raw) {
                Ok(line) => line,
                Err(e) => {
                    let source = MalformedRecord {
                        reason: "invalid UTF-8".into(),
                        offset: e.valid_up_to(),
                    };
                    skip_or_fail(malformed(source), mode, &mut out.corrupt_lines)?;
                    continue;
                }
            };
            if idx == 0 {
                match check_header(line) {
                    Ok(true) => continue,
                    Ok(false) => {
                        let source = MalformedRecord {
                            reason: "missing format header".into(),
                            offset: 0,
                        };
                        skip_or_fail(malformed(source), mode, &mut out.corrupt_lines)?;
                    }
                    Err(source) => {
                        return Err(StorageError::UnsupportedVersion {
                            path: path.clone(),
                            source,
                        })
                    }
                }
            }
            match parse_record_line(line) {
                Ok(r) if r.machine() == machine && r.timestamp().date_naive() == date => match r {
                    Record::Slot(o) => out.observations.push(o),
                    Record::Machine(m) => out.machine_records.push(m),
                },
                Ok(_) => {
                    let source = MalformedRecord {
                        reason: "record belongs to another machine or day".into(),
                        offset: 0,
                    };
                    skip_or_fail(malformed(source), mode, &mut out.corrupt_lines)?;
                }
                Err(source) => skip_or_fail(malformed(source), mode, &mut out.corrupt_lines)?,
            }
        }
        out.observations.sort_by_key(SlotObservation::order_key);
        Ok(out)
    }

    /// Slot observations of one machine-day sorted by `(timestamp, slot)`.
    pub fn read_machine_day(
        &self,
        machine: &str,
        date: NaiveDate,
        mode: ReadMode,
    ) -> Result<(Vec<SlotObservation>, usize), StorageError> {
        let day = self.read_day_records(machine, date, mode)?;
        Ok((day.observations, day.corrupt_lines))
    }

    /// Exactly `span_days` consecutive days starting at `start`, absent days
    /// reading as empty.
    pub fn read_range(
        &self,
        machine: &str,
        start: NaiveDate,
        span_days: u32,
        mode: ReadMode,
    ) -> Result<RangeRead, StorageError> {
        if span_days == 0 || span_days > MAX_SPAN_DAYS {
            return Err(StorageError::InvalidSpan(span_days));
        }
        let mut out = RangeRead::default();
        for i in 0..span_days {
            let date = start + Days::new(u64::from(i));
            let (obs, corrupt) = self.read_machine_day(machine, date, mode)?;
            out.corrupt_lines += corrupt;
            out.days.push((date, obs));
        }
        Ok(out)
    }

    /// Latest instant at or before `as_of` at which `machine` was observed
    /// running or suspending a job, looking back `lookback_days` UTC days
    /// (the day of `as_of` included). Scans newest day first.
    pub fn last_job_time(
        &self,
        machine: &str,
        as_of: Timestamp,
        lookback_days: u32,
        mode: ReadMode,
    ) -> Result<Option<Timestamp>, StorageError> {
        let today = as_of.date_naive();
        for back in 0..lookback_days.max(1) {
            let Some(date) = today.checked_sub_days(Days::new(u64::from(back))) else {
                break;
            };
            let (obs, _) = self.read_machine_day(machine, date, mode)?;
            let hit = obs
                .iter()
                .filter(|o| o.timestamp() <= as_of && o.phase().is_some())
                .map(SlotObservation::timestamp)
                .max();
            if hit.is_some() {
                return Ok(hit);
            }
        }
        Ok(None)
    }

    /// Timestamp of the newest record stored for any machine within
    /// `lookback_days` of `as_of`.
    pub fn latest_record_time(
        &self,
        as_of: Timestamp,
        lookback_days: u32,
    ) -> Result<Option<Timestamp>, StorageError> {
        let today = as_of.date_naive();
        for back in 0..lookback_days.max(1) {
            let Some(date) = today.checked_sub_days(Days::new(u64::from(back))) else {
                break;
            };
            let dir = self.day_dir(date);
            let entries = match fs::read_dir(&dir) {
                Ok(e) => e,
                Err(e) if e.kind() == io::ErrorKind::NotFound => continue,
                Err(e) => return Err(StorageError::io(&dir)(e)),
            };
            let mut latest: Option<Timestamp> = None;
            for entry in entries {
                let entry = entry.map_err(StorageError::io(&dir))?;
                let p = entry.path();
                if p.extension().and_then(|e| e.to_str()) != Some(RECORD_EXT) {
                    continue;
                }
                let Some(machine) = p.file_stem().and_then(|s| s.to_str()) else {
                    continue;
                };
                if validate_machine_name(machine).is_err() {
                    continue;
                }
                let day = self.read_day_records(machine, date, ReadMode::Lenient)?;
                let newest = day
                    .observations
                    .last()
                    .map(SlotObservation::timestamp)
                    .into_iter()
                    .chain(day.machine_records.iter().map(MachineRecord::timestamp))
                    .filter(|t| *t <= as_of)
                    .max();
                latest = latest.max(newest);
            }
            if latest.is_some() {
                return Ok(latest);
            }
        }
        Ok(None)
    }

    /// Whether the root exists and is a directory.
    pub fn is_present(&self) -> bool {
        self.path.is_dir()
    }
}

fn skip_or_fail(e: StorageError, mode: ReadMode, corrupt: &mut usize) -> Result<(), StorageError> {
    match mode {
        ReadMode::Strict => Err(e),
        ReadMode::Lenient => {
            *corrupt += 1;
            Ok(())
        }
    }
}
