//! The pipe-delimited record format shared by the status source, the
//! collector and the data root.
//!
//! ```text
//! S|<iso8601Z>|<machine>|<slot>|<state>|<activity>|<load>|<job_id>|<owner>
//! M|<iso8601Z>|<machine>|<slot_count>|<os_name>|<os_version>|<mem_total>|<mem_per_slot>|<disk_free_total>|<disk_free_per_slot>|<load_total>|<load_condor>
//! Q|<user>|<running>|<idle>|<held>
//! ```
//!
//! Absent optionals are empty fields, per-slot lists are `,`-joined and
//! loads carry exactly two decimals when rendered. Parsing is strict and
//! canonical: anything the renderer would not produce is rejected.

use std::collections::{BTreeMap, HashSet};

use chrono::{NaiveDateTime, TimeZone, Utc};
use thiserror::Error;

use crate::model::{
    validate_text, JobRef, MachineAttributes, MachineInfo, MachineRecord, MachineRegistry,
    MachineStatus, PoolSnapshot, QueueCounts, QueueRow, QueueSummary, SlotObservation, Timestamp,
};

/// First line of every stored file.
pub const FORMAT_HEADER: &str = "#congusto-format 1";
const HEADER_PREFIX: &str = "#congusto-format ";

const SLOT_FIELDS: usize = 9;
const MACHINE_FIELDS: usize = 12;
const QUEUE_FIELDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed record at byte {offset}: {reason}")]
pub struct MalformedRecord {
    pub reason: String,
    pub offset: usize,
}

impl MalformedRecord {
    fn new(reason: impl Into<String>, offset: usize) -> Self {
        MalformedRecord {
            reason: reason.into(),
            offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatusParseError {
    #[error("line {line}: {source}")]
    Malformed {
        line: usize,
        #[source]
        source: MalformedRecord,
    },
    #[error("duplicate slot {slot} for machine {machine}")]
    DuplicateSlot { machine: String, slot: u32 },
}

/// A stored or streamed record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Record {
    Slot(SlotObservation),
    Machine(MachineRecord),
}

impl Record {
    pub fn timestamp(&self) -> Timestamp {
        match self {
            Record::Slot(o) => o.timestamp(),
            Record::Machine(m) => m.timestamp(),
        }
    }

    pub fn machine(&self) -> &str {
        match self {
            Record::Slot(o) => o.machine(),
            Record::Machine(m) => m.machine(),
        }
    }
}

impl From<SlotObservation> for Record {
    fn from(o: SlotObservation) -> Self {
        Record::Slot(o)
    }
}

impl From<MachineRecord> for Record {
    fn from(m: MachineRecord) -> Self {
        Record::Machine(m)
    }
}

pub fn format_timestamp(t: Timestamp) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

pub fn parse_timestamp(s: &str) -> Option<Timestamp> {
    if s.len() != 20 {
        return None;
    }
    let naive = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%SZ").ok()?;
    let t = Utc.from_utc_datetime(&naive);
    (format_timestamp(t) == s).then_some(t)
}

/// Parses an unsigned integer written without sign or leading zeros.
fn parse_canonical<T: std::str::FromStr + ToString>(s: &str) -> Option<T> {
    let v: T = s.parse().ok()?;
    (v.to_string() == s).then_some(v)
}

/// Splits a line on `|`, remembering where each field starts.
struct Fields<'a> {
    fields: Vec<(&'a str, usize)>,
}

impl<'a> Fields<'a> {
    fn split(line: &'a str) -> Self {
        let mut fields = Vec::new();
        let mut offset = 0;
        for f in line.split('|') {
            fields.push((f, offset));
            offset += f.len() + 1;
        }
        Fields { fields }
    }

    fn get(&self, i: usize) -> (&'a str, usize) {
        self.fields[i]
    }

    fn parse<T>(&self, i: usize, what: &str, f: impl FnOnce(&str) -> Option<T>) -> Result<T, MalformedRecord> {
        let (s, off) = self.get(i);
        f(s).ok_or_else(|| MalformedRecord::new(format!("invalid {what} {s:?}"), off))
    }
}

fn check_line(line: &str) -> Result<(), MalformedRecord> {
    if let Some(pos) = line.find(['\n', '\r']) {
        return Err(MalformedRecord::new("embedded line break", pos));
    }
    Ok(())
}

/// Parses one `S` or `M` line.
pub fn parse_record_line(line: &str) -> Result<Record, MalformedRecord> {
    check_line(line)?;
    let fields = Fields::split(line);
    let expected = match fields.get(0).0 {
        "S" => SLOT_FIELDS,
        "M" => MACHINE_FIELDS,
        other => return Err(MalformedRecord::new(format!("unknown record kind {other:?}"), 0)),
    };
    if fields.fields.len() != expected {
        return Err(MalformedRecord::new(
            format!("expected {expected} fields, found {}", fields.fields.len()),
            0,
        ));
    }
    if expected == SLOT_FIELDS {
        parse_slot_fields(&fields).map(Record::Slot)
    } else {
        parse_machine_fields(&fields).map(Record::Machine)
    }
}

fn parse_slot_fields(f: &Fields<'_>) -> Result<SlotObservation, MalformedRecord> {
    let timestamp = f.parse(1, "timestamp", parse_timestamp)?;
    let (machine, machine_off) = f.get(2);
    let slot: u32 = f.parse(3, "slot", parse_canonical)?;
    let state = f.parse(4, "state", |s| s.parse().ok())?;
    let activity = f.parse(5, "activity", |s| s.parse().ok())?;
    let load = f.parse(6, "load", |s| s.parse().ok())?;
    let (job_id, job_off) = f.get(7);
    let (owner, owner_off) = f.get(8);
    let job = match (job_id.is_empty(), owner.is_empty()) {
        (true, true) => None,
        (false, false) => {
            let job_id = job_id
                .parse()
                .map_err(|e| MalformedRecord::new(format!("{e}"), job_off))?;
            validate_text(owner).map_err(|e| MalformedRecord::new(e.to_string(), owner_off))?;
            Some(JobRef {
                job_id,
                owner: owner.to_string(),
            })
        }
        (true, false) => return Err(MalformedRecord::new("owner without job id", job_off)),
        (false, true) => return Err(MalformedRecord::new("job id without owner", owner_off)),
    };
    SlotObservation::new(timestamp, machine, slot, state, activity, load, job).map_err(|e| {
        let off = match e {
            crate::model::ModelError::InvalidName(_) => machine_off,
            crate::model::ModelError::ZeroSlot => f.get(3).1,
            _ => f.get(4).1,
        };
        MalformedRecord::new(e.to_string(), off)
    })
}

fn parse_list(s: &str) -> Option<Vec<u64>> {
    s.split(',').map(parse_canonical).collect()
}

fn parse_machine_fields(f: &Fields<'_>) -> Result<MachineRecord, MalformedRecord> {
    let timestamp = f.parse(1, "timestamp", parse_timestamp)?;
    let (machine, machine_off) = f.get(2);
    let attributes = MachineAttributes {
        slot_count: f.parse(3, "slot count", parse_canonical)?,
        os_name: f.get(4).0.to_string(),
        os_version: f.get(5).0.to_string(),
        memory_mb_total: f.parse(6, "memory total", parse_canonical)?,
        memory_mb_per_slot: f.parse(7, "memory per slot", parse_list)?,
        disk_mb_free_total: f.parse(8, "disk total", parse_canonical)?,
        disk_mb_free_per_slot: f.parse(9, "disk per slot", parse_list)?,
        load_avg_total: f.parse(10, "total load", |s| s.parse().ok())?,
        load_avg_condor: f.parse(11, "condor load", |s| s.parse().ok())?,
    };
    MachineRecord::new(timestamp, machine, attributes).map_err(|e| {
        use crate::model::ModelError as E;
        let off = match e {
            E::InvalidName(_) => machine_off,
            E::PerSlotLength { .. } | E::ZeroSlotCount => f.get(3).1,
            E::CondorLoadExceedsTotal { .. } => f.get(11).1,
            _ => 0,
        };
        MalformedRecord::new(e.to_string(), off)
    })
}

fn join_list(v: &[u64]) -> String {
    v.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

pub fn render_slot(o: &SlotObservation) -> String {
    format!(
        "S|{}|{}|{}|{}|{}|{}|{}|{}",
        format_timestamp(o.timestamp()),
        o.machine(),
        o.slot(),
        o.state(),
        o.activity(),
        o.load(),
        o.job_id().map(|j| j.as_str()).unwrap_or(""),
        o.owner().unwrap_or(""),
    )
}

pub fn render_machine(m: &MachineRecord) -> String {
    let a = m.attributes();
    format!(
        "M|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}",
        format_timestamp(m.timestamp()),
        m.machine(),
        a.slot_count,
        a.os_name,
        a.os_version,
        a.memory_mb_total,
        join_list(&a.memory_mb_per_slot),
        a.disk_mb_free_total,
        join_list(&a.disk_mb_free_per_slot),
        a.load_avg_total,
        a.load_avg_condor,
    )
}

/// Renders a record without its trailing newline.
pub fn render_record_line(r: &Record) -> String {
    match r {
        Record::Slot(o) => render_slot(o),
        Record::Machine(m) => render_machine(m),
    }
}

pub fn render_queue_row(row: &QueueRow) -> String {
    format!(
        "Q|{}|{}|{}|{}",
        row.user, row.counts.running, row.counts.idle, row.counts.held
    )
}

/// Checks an optional header line. Returns `Ok(true)` if `line` is a header.
pub fn check_header(line: &str) -> Result<bool, MalformedRecord> {
    if line == FORMAT_HEADER {
        Ok(true)
    } else if let Some(version) = line.strip_prefix(HEADER_PREFIX) {
        Err(MalformedRecord::new(
            format!("unsupported format version {version:?}"),
            HEADER_PREFIX.len(),
        ))
    } else {
        Ok(false)
    }
}

/// Groups a full status listing into a snapshot stamped at `taken_at`.
///
/// Machines listed in `registry` but absent from `text` are reported as
/// unreachable with placeholder attributes. The snapshot carries an empty
/// queue; queue output is parsed separately.
pub fn parse_status_output(
    text: &str,
    taken_at: Timestamp,
    registry: &MachineRegistry,
) -> Result<PoolSnapshot, StatusParseError> {
    let mut machines: BTreeMap<String, (usize, MachineRecord)> = BTreeMap::new();
    let mut slots: BTreeMap<String, BTreeMap<u32, (usize, SlotObservation)>> = BTreeMap::new();
    let malformed = |line: usize, source| StatusParseError::Malformed { line, source };

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.is_empty() || check_header(line).map_err(|e| malformed(lineno, e))? {
            continue;
        }
        match parse_record_line(line).map_err(|e| malformed(lineno, e))? {
            Record::Machine(m) => {
                let m = m.with_timestamp(taken_at).map_err(|e| {
                    malformed(lineno, MalformedRecord::new(e.to_string(), 2))
                })?;
                if machines.contains_key(m.machine()) {
                    return Err(malformed(
                        lineno,
                        MalformedRecord::new(format!("duplicate machine record for {}", m.machine()), 2),
                    ));
                }
                machines.insert(m.machine().to_string(), (lineno, m));
            }
            Record::Slot(o) => {
                let o = o.with_timestamp(taken_at).map_err(|e| {
                    malformed(lineno, MalformedRecord::new(e.to_string(), 2))
                })?;
                let per_machine = slots.entry(o.machine().to_string()).or_default();
                if per_machine.contains_key(&o.slot()) {
                    return Err(StatusParseError::DuplicateSlot {
                        machine: o.machine().to_string(),
                        slot: o.slot(),
                    });
                }
                per_machine.insert(o.slot(), (lineno, o));
            }
        }
    }

    for (name, per_machine) in &slots {
        let Some((_, m)) = machines.get(name) else {
            let (lineno, _) = per_machine.values().next().expect("non-empty slot map");
            return Err(malformed(
                *lineno,
                MalformedRecord::new(format!("slot record for {name} without a machine record"), 2),
            ));
        };
        let slot_count = m.attributes().slot_count;
        if let Some((lineno, o)) = per_machine.values().find(|(_, o)| o.slot() > slot_count) {
            return Err(malformed(
                *lineno,
                MalformedRecord::new(
                    format!("slot {} exceeds slot count {slot_count} of {name}", o.slot()),
                    2,
                ),
            ));
        }
    }

    let mut out: Vec<MachineStatus> = Vec::new();
    let mut seen = HashSet::new();
    for (name, (_, record)) in machines {
        let slot_obs: Vec<SlotObservation> = slots
            .remove(&name)
            .map(|m| m.into_values().map(|(_, o)| o).collect())
            .unwrap_or_default();
        let restriction = registry.get(&name).and_then(|e| e.restriction.clone());
        seen.insert(name.clone());
        out.push(MachineStatus {
            info: MachineInfo {
                machine: name,
                attributes: record.attributes().clone(),
                restriction,
                last_job_time: None,
                reachable: true,
            },
            time_in_state_s: vec![0; slot_obs.len()],
            slots: slot_obs,
        });
    }
    for entry in registry.entries() {
        if !seen.contains(&entry.machine) {
            out.push(MachineStatus {
                info: MachineInfo {
                    machine: entry.machine.clone(),
                    attributes: MachineAttributes::unknown(entry.slot_count),
                    restriction: entry.restriction.clone(),
                    last_job_time: None,
                    reachable: false,
                },
                slots: Vec::new(),
                time_in_state_s: Vec::new(),
            });
        }
    }
    out.sort_by(|a, b| a.info.machine.cmp(&b.info.machine));

    Ok(PoolSnapshot {
        taken_at,
        machines: out,
        queue: QueueSummary::default(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("queue line {line}: {source}")]
pub struct QueueParseError {
    pub line: usize,
    #[source]
    pub source: MalformedRecord,
}

fn parse_queue_line(line: &str) -> Result<QueueRow, MalformedRecord> {
    check_line(line)?;
    let f = Fields::split(line);
    if f.get(0).0 != "Q" {
        return Err(MalformedRecord::new("expected a Q record", 0));
    }
    if f.fields.len() != QUEUE_FIELDS {
        return Err(MalformedRecord::new(
            format!("expected {QUEUE_FIELDS} fields, found {}", f.fields.len()),
            0,
        ));
    }
    let (user, user_off) = f.get(1);
    validate_text(user).map_err(|e| MalformedRecord::new(e.to_string(), user_off))?;
    Ok(QueueRow {
        user: user.to_string(),
        counts: QueueCounts {
            running: f.parse(2, "running count", parse_canonical)?,
            idle: f.parse(3, "idle count", parse_canonical)?,
            held: f.parse(4, "held count", parse_canonical)?,
        },
    })
}

/// Parses `Q|<user>|<running>|<idle>|<held>` lines into a queue summary.
/// Rows keep their input order; each user may appear once.
pub fn parse_queue_output(text: &str) -> Result<QueueSummary, QueueParseError> {
    let mut rows: Vec<QueueRow> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let err = |source| QueueParseError { line: idx + 1, source };
        if line.is_empty() || check_header(line).map_err(err)? {
            continue;
        }
        let row = parse_queue_line(line).map_err(err)?;
        if rows.iter().any(|r| r.user == row.user) {
            return Err(err(MalformedRecord::new(format!("duplicate user {}", row.user), 2)));
        }
        rows.push(row);
    }
    Ok(QueueSummary::from_rows(rows))
}

pub fn render_queue_output(q: &QueueSummary) -> String {
    let mut out = String::new();
    for row in q.rows() {
        out.push_str(&render_queue_row(row));
        out.push('\n');
    }
    out
}
