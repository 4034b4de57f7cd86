//! Query string schema of the live panoramic view.
//!
//! | key | value |
//! |-----|-------|
//! | `show` | comma list of `machines`, `queue`, `charts` (default `machines,queue`) |
//! | `fields` | comma list of [`Field`] ids (default all) |
//! | `sort` | [`SortKey`] id (default `name`) |
//! | `order` | `asc` or `desc` (default `asc`) |
//! | `reachable` | `up`, `down` or `any` (default `any`) |
//! | `os` | exact OS name |
//! | `os_version` | OS version prefix |
//! | `state` | comma list of slot states |
//! | `owner` | job owner of a slot |
//! | `<range>_min`, `<range>_max` | inclusive bounds, see [`RangeField`] |
//! | `disk_alert_mb` | alert when total free disk is below this |
//! | `charts` | comma list of chart ids (default all when charts are shown) |
//! | `refresh_s` | client refresh period, `0` (off) or `5..=86400` |
//!
//! Slot-level predicates (`state`, `owner`, `time_in_state_s_*`) must all
//! hold on one and the same slot. Machine attribute ranges never match an
//! unreachable machine, whose attributes are unknown.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use super::charts::ChartId;
use crate::model::{Load, SlotState};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct QueryError(pub String);

macro_rules! id_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $id:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
        pub enum $name {
            $(#[serde(rename = $id)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn id(self) -> &'static str {
                match self {
                    $($name::$variant => $id),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.id())
            }
        }

        impl FromStr for $name {
            type Err = QueryError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($id => Ok($name::$variant),)+
                    _ => Err(QueryError(format!(
                        "unknown {} {s:?}",
                        stringify!($name)
                    ))),
                }
            }
        }
    };
}

id_enum!(
    /// Sections of the panoramic payload.
    Section {
        Machines => "machines",
        Queue => "queue",
        Charts => "charts",
    }
);

id_enum!(
    /// Optional machine columns. The name is always included.
    Field {
        Slots => "slots",
        DiskTotal => "disk_total",
        DiskPerSlot => "disk_per_slot",
        MemoryTotal => "memory_total",
        MemoryPerSlot => "memory_per_slot",
        Os => "os",
        LoadTotal => "load_total",
        LoadCondor => "load_condor",
        Restriction => "restriction",
        LastJobTime => "last_job_time",
    }
);

id_enum!(
    SortKey {
        Name => "name",
        Load => "load",
        FreeDisk => "free_disk",
        Memory => "memory",
        SlotCount => "slot_count",
        LastJobTime => "last_job_time",
    }
);

id_enum!(
    Order {
        Asc => "asc",
        Desc => "desc",
    }
);

id_enum!(
    Reachability {
        Up => "up",
        Down => "down",
        Any => "any",
    }
);

id_enum!(
    /// Numeric filters, each with `_min` and `_max` keys.
    RangeField {
        MemoryMb => "memory_mb",
        DiskMbFree => "disk_mb_free",
        LoadAvgTotal => "load_avg_total",
        LoadAvgCondor => "load_avg_condor",
        SlotCount => "slot_count",
        TimeInStateS => "time_in_state_s",
    }
);

/// Inclusive range; either end may be open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Range<T> {
    pub min: Option<T>,
    pub max: Option<T>,
}

impl<T: PartialOrd + Copy> Range<T> {
    pub fn is_open(&self) -> bool {
        self.min.is_none() && self.max.is_none()
    }

    pub fn contains(&self, v: T) -> bool {
        self.min.is_none_or(|m| v >= m) && self.max.is_none_or(|m| v <= m)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PanoramicQuery {
    pub show: BTreeSet<Section>,
    pub fields: BTreeSet<Field>,
    pub sort: SortKey,
    pub order: Order,
    pub reachable: Reachability,
    pub os: Option<String>,
    pub os_version: Option<String>,
    pub states: Option<BTreeSet<SlotState>>,
    pub owner: Option<String>,
    pub memory_mb: Range<u64>,
    pub disk_mb_free: Range<u64>,
    pub load_avg_total: Range<Load>,
    pub load_avg_condor: Range<Load>,
    pub slot_count: Range<u32>,
    pub time_in_state_s: Range<u64>,
    pub disk_alert_mb: Option<u64>,
    pub charts: Vec<ChartId>,
    pub refresh_s: u32,
}

impl Default for PanoramicQuery {
    fn default() -> Self {
        PanoramicQuery {
            show: [Section::Machines, Section::Queue].into(),
            fields: Field::ALL.iter().copied().collect(),
            sort: SortKey::Name,
            order: Order::Asc,
            reachable: Reachability::Any,
            os: None,
            os_version: None,
            states: None,
            owner: None,
            memory_mb: Range::default(),
            disk_mb_free: Range::default(),
            load_avg_total: Range::default(),
            load_avg_condor: Range::default(),
            slot_count: Range::default(),
            time_in_state_s: Range::default(),
            disk_alert_mb: None,
            charts: ChartId::ALL.to_vec(),
            refresh_s: 0,
        }
    }
}

fn parse_list<T: FromStr<Err = QueryError> + Ord>(key: &str, v: &str) -> Result<Vec<T>, QueryError> {
    if v.is_empty() {
        return Err(QueryError(format!("{key} must not be empty")));
    }
    let items = v.split(',').map(str::parse).collect::<Result<Vec<T>, _>>()?;
    Ok(items)
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, QueryError> {
    v.parse().map_err(|_| QueryError(format!("{key}: invalid number {v:?}")))
}

fn set_bound<T: FromStr>(range: &mut Range<T>, is_min: bool, key: &str, v: &str) -> Result<(), QueryError> {
    let value = Some(parse_num(key, v)?);
    if is_min {
        range.min = value;
    } else {
        range.max = value;
    }
    Ok(())
}

fn check_range<T: PartialOrd + fmt::Display + Copy>(name: &str, r: &Range<T>) -> Result<(), QueryError> {
    match (r.min, r.max) {
        (Some(a), Some(b)) if a > b => Err(QueryError(format!("{name}: min {a} exceeds max {b}"))),
        _ => Ok(()),
    }
}

impl PanoramicQuery {
    /// Builds a query from decoded query-string pairs. Unknown and repeated
    /// keys are rejected, as are empty lists and inverted ranges.
    pub fn from_pairs<K: AsRef<str>, V: AsRef<str>>(pairs: &[(K, V)]) -> Result<Self, QueryError> {
        let mut q = PanoramicQuery::default();
        let mut seen = BTreeSet::new();
        for (k, v) in pairs {
            let (key, v) = (k.as_ref(), v.as_ref());
            if !seen.insert(key.to_string()) {
                return Err(QueryError(format!("{key} given twice")));
            }
            match key {
                "show" => q.show = parse_list(key, v)?.into_iter().collect(),
                "fields" => q.fields = parse_list(key, v)?.into_iter().collect(),
                "sort" => q.sort = v.parse()?,
                "order" => q.order = v.parse()?,
                "reachable" => q.reachable = v.parse()?,
                "os" => q.os = Some(v.to_string()),
                "os_version" => q.os_version = Some(v.to_string()),
                "state" => {
                    if v.is_empty() {
                        return Err(QueryError("state must not be empty".into()));
                    }
                    let states = v
                        .split(',')
                        .map(|s| s.parse::<SlotState>().map_err(|e| QueryError(format!("state: {e}"))))
                        .collect::<Result<_, _>>()?;
                    q.states = Some(states);
                }
                "owner" => q.owner = Some(v.to_string()),
                "disk_alert_mb" => q.disk_alert_mb = Some(parse_num(key, v)?),
                "charts" => {
                    let mut ids: Vec<ChartId> = parse_list(key, v)?;
                    ids.sort();
                    ids.dedup();
                    q.charts = ids;
                }
                "refresh_s" => {
                    let r: u32 = parse_num(key, v)?;
                    if r != 0 && !(5..=86_400).contains(&r) {
                        return Err(QueryError("refresh_s must be 0 or within 5..=86400".into()));
                    }
                    q.refresh_s = r;
                }
                _ => {
                    let (field, is_min) = if let Some(f) = key.strip_suffix("_min") {
                        (f, true)
                    } else if let Some(f) = key.strip_suffix("_max") {
                        (f, false)
                    } else {
                        return Err(QueryError(format!("unknown filter {key:?}")));
                    };
                    let field: RangeField = field
                        .parse()
                        .map_err(|_| QueryError(format!("unknown filter {key:?}")))?;
                    match field {
                        RangeField::MemoryMb => set_bound(&mut q.memory_mb, is_min, key, v)?,
                        RangeField::DiskMbFree => set_bound(&mut q.disk_mb_free, is_min, key, v)?,
                        RangeField::LoadAvgTotal => set_bound(&mut q.load_avg_total, is_min, key, v)?,
                        RangeField::LoadAvgCondor => set_bound(&mut q.load_avg_condor, is_min, key, v)?,
                        RangeField::SlotCount => set_bound(&mut q.slot_count, is_min, key, v)?,
                        RangeField::TimeInStateS => set_bound(&mut q.time_in_state_s, is_min, key, v)?,
                    }
                }
            }
        }
        check_range("memory_mb", &q.memory_mb)?;
        check_range("disk_mb_free", &q.disk_mb_free)?;
        check_range("load_avg_total", &q.load_avg_total)?;
        check_range("load_avg_condor", &q.load_avg_condor)?;
        check_range("slot_count", &q.slot_count)?;
        check_range("time_in_state_s", &q.time_in_state_s)?;
        Ok(q)
    }

    /// Whether any slot-level predicate is set.
    pub fn has_slot_predicates(&self) -> bool {
        self.states.is_some() || self.owner.is_some() || !self.time_in_state_s.is_open()
    }

    /// Whether any machine-attribute range is set.
    pub fn has_attribute_ranges(&self) -> bool {
        !(self.memory_mb.is_open()
            && self.disk_mb_free.is_open()
            && self.load_avg_total.is_open()
            && self.load_avg_condor.is_open()
            && self.slot_count.is_open())
    }
}
