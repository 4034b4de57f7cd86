//! `machines.reg`: one `R|<name>|<slot_count>|<restriction>` line per
//! machine after the format header. The restriction is empty for an
//! unrestricted machine, `never` for an empty schedule, and otherwise the
//! `;`-joined `d:HH:MM-HH:MM` windows.

use std::fs;
use std::io::{self, Write};

use super::{DataRoot, StorageError};
use crate::model::{MachineRegistry, RegistryEntry, ScheduleWindows};
use crate::record::{check_header, MalformedRecord, FORMAT_HEADER};

const NEVER: &str = "never";

fn render_restriction(r: &Option<ScheduleWindows>) -> String {
    match r {
        None => String::new(),
        Some(w) if w.windows.is_empty() => NEVER.to_string(),
        Some(w) => w.to_string(),
    }
}

pub fn render_registry(registry: &MachineRegistry) -> String {
    let mut out = format!("{FORMAT_HEADER}\n");
    for e in registry.entries() {
        out.push_str(&format!(
            "R|{}|{}|{}\n",
            e.machine,
            e.slot_count,
            render_restriction(&e.restriction)
        ));
    }
    out
}

fn parse_entry(line: &str) -> Result<RegistryEntry, MalformedRecord> {
    let err = |reason: String, offset| MalformedRecord { reason, offset };
    let fields: Vec<&str> = line.split('|').collect();
    if fields.len() != 4 || fields[0] != "R" {
        return Err(err("expected R|<name>|<slot_count>|<restriction>".into(), 0));
    }
    let name_off = 2;
    let slots_off = name_off + fields[1].len() + 1;
    let restr_off = slots_off + fields[2].len() + 1;
    let slot_count: u32 = fields[2]
        .parse()
        .ok()
        .filter(|n: &u32| n.to_string() == fields[2] && *n >= 1)
        .ok_or_else(|| err(format!("invalid slot count {:?}", fields[2]), slots_off))?;
    let restriction = match fields[3] {
        "" => None,
        NEVER => Some(ScheduleWindows::default()),
        spec => Some(spec.parse().map_err(|e| err(format!("{e}"), restr_off))?),
    };
    Ok(RegistryEntry {
        machine: fields[1].to_string(),
        slot_count,
        restriction,
    })
}

/// Parses registry text. Names must be unique.
pub fn parse_registry(text: &str) -> Result<MachineRegistry, (usize, MalformedRecord)> {
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.is_empty() || check_header(line).map_err(|e| (lineno, e))? {
            continue;
        }
        let entry = parse_entry(line).map_err(|e| (lineno, e))?;
        if let Err(e) = MachineRegistry::new(vec![entry.clone()]) {
            return Err((lineno, MalformedRecord { reason: e.to_string(), offset: 2 }));
        }
        if entries.iter().any(|e: &RegistryEntry| e.machine == entry.machine) {
            return Err((
                lineno,
                MalformedRecord {
                    reason: format!("duplicate machine {}", entry.machine),
                    offset: 2,
                },
            ));
        }
        entries.push(entry);
    }
    Ok(MachineRegistry::new(entries).expect("entries validated line by line"))
}

impl DataRoot {
    pub fn load_registry(&self) -> Result<MachineRegistry, StorageError> {
        let path = self.registry_path();
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StorageError::RegistryMissing(path)),
            Err(e) => return Err(StorageError::io(&path)(e)),
        };
        parse_registry(&text).map_err(|(line, source)| {
            if source.reason.starts_with("unsupported format version") {
                StorageError::UnsupportedVersion { path, source }
            } else {
                StorageError::Malformed { path, line, source }
            }
        })
    }

    /// Like [`DataRoot::load_registry`] but a missing file yields an empty registry.
    pub fn load_registry_or_empty(&self) -> Result<MachineRegistry, StorageError> {
        match self.load_registry() {
            Err(StorageError::RegistryMissing(_)) => Ok(MachineRegistry::default()),
            other => other,
        }
    }

    /// Replaces the registry file atomically (write to a sibling, then rename).
    pub fn save_registry(&self, registry: &MachineRegistry) -> Result<(), StorageError> {
        fs::create_dir_all(self.path()).map_err(StorageError::io(self.path()))?;
        let path = self.registry_path();
        let tmp = self.path().join(".machines.reg.tmp");
        let mut f = fs::File::create(&tmp).map_err(StorageError::io(&tmp))?;
        f.write_all(render_registry(registry).as_bytes())
            .map_err(StorageError::io(&tmp))?;
        f.sync_all().map_err(StorageError::io(&tmp))?;
        fs::rename(&tmp, &path).map_err(StorageError::io(&path))
    }
}
