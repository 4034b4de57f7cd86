//! The fixed catalog of fifteen panoramic charts. Every chart is computed
//! over the machines currently shown.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::query::QueryError;
use crate::model::{JobPhase, MachineStatus, SlotActivity, SlotState, Timestamp};

macro_rules! charts {
    ($($variant:ident => $id:literal, $title:literal, $kind:ident;)+) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
        pub enum ChartId {
            $(#[serde(rename = $id)] $variant),+
        }

        impl ChartId {
            pub const ALL: &'static [ChartId] = &[$(ChartId::$variant),+];

            pub fn id(self) -> &'static str {
                match self {
                    $(ChartId::$variant => $id),+
                }
            }

            pub fn title(self) -> &'static str {
                match self {
                    $(ChartId::$variant => $title),+
                }
            }

            pub fn kind(self) -> ChartKind {
                match self {
                    $(ChartId::$variant => ChartKind::$kind),+
                }
            }
        }

        impl FromStr for ChartId {
            type Err = QueryError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($id => Ok(ChartId::$variant),)+
                    _ => Err(QueryError(format!("unknown chart {s:?}"))),
                }
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    Pie,
    Bar,
    Histogram,
}

charts! {
    SlotsByState => "slots_by_state", "Slots by state", Pie;
    MachinesUpDown => "machines_up_down", "Machines up and down", Pie;
    JobsByOwner => "jobs_by_owner", "Jobs by owner", Bar;
    RunningVsSuspended => "running_vs_suspended", "Running and suspended jobs", Pie;
    FreeDiskHistogram => "free_disk_histogram", "Free disk per machine (MB)", Histogram;
    MemoryHistogram => "memory_histogram", "Memory per machine (MB)", Histogram;
    LoadHistogram => "load_histogram", "Total load average", Histogram;
    CondorLoadHistogram => "condor_load_histogram", "Scheduler load average", Histogram;
    SlotsPerMachine => "slots_per_machine", "Slots per machine", Bar;
    OsDistribution => "os_distribution", "Operating systems", Pie;
    ActivityDistribution => "activity_distribution", "Slot activities", Pie;
    TimeInStateHistogram => "time_in_state_histogram", "Time in current state", Histogram;
    SuspendedJobOwners => "suspended_job_owners", "Owners of suspended jobs", Bar;
    RestrictedVsUnrestricted => "restricted_vs_unrestricted", "Execution restrictions", Pie;
    LastExecutionAgeHistogram => "last_execution_age_histogram", "Time since last job", Histogram;
}

impl fmt::Display for ChartId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChartPoint {
    pub label: String,
    pub value: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChartData {
    pub id: ChartId,
    pub title: &'static str,
    pub kind: ChartKind,
    pub points: Vec<ChartPoint>,
}

/// Counts values into labelled bins given by ascending upper bounds; the
/// last label takes everything above.
fn histogram(values: impl Iterator<Item = u64>, bounds: &[u64], labels: &[&str]) -> Vec<ChartPoint> {
    debug_assert_eq!(bounds.len() + 1, labels.len());
    let mut counts = vec![0u64; labels.len()];
    for v in values {
        counts[bounds.partition_point(|b| v >= *b)] += 1;
    }
    labels
        .iter()
        .zip(counts)
        .map(|(l, value)| ChartPoint {
            label: l.to_string(),
            value,
        })
        .collect()
}

fn tally(labels: impl Iterator<Item = String>) -> Vec<ChartPoint> {
    let mut m: BTreeMap<String, u64> = BTreeMap::new();
    for l in labels {
        *m.entry(l).or_default() += 1;
    }
    m.into_iter().map(|(label, value)| ChartPoint { label, value }).collect()
}

fn fixed(pairs: &[(&str, u64)]) -> Vec<ChartPoint> {
    pairs
        .iter()
        .map(|(l, v)| ChartPoint {
            label: l.to_string(),
            value: *v,
        })
        .collect()
}

const LOAD_BOUNDS: [u64; 4] = [50, 100, 200, 400];
const LOAD_LABELS: [&str; 5] = ["<0.5", "0.5-1", "1-2", "2-4", ">=4"];

pub fn compute_chart(id: ChartId, machines: &[&MachineStatus], taken_at: Timestamp) -> ChartData {
    let up = || machines.iter().filter(|m| m.info.reachable);
    let slots = || machines.iter().flat_map(|m| m.slots.iter());
    let points = match id {
        ChartId::SlotsByState => {
            let counts: BTreeMap<SlotState, u64> = slots().fold(BTreeMap::new(), |mut acc, s| {
                *acc.entry(s.state()).or_default() += 1;
                acc
            });
            SlotState::ALL
                .iter()
                .map(|st| ChartPoint {
                    label: st.to_string(),
                    value: counts.get(st).copied().unwrap_or(0),
                })
                .collect()
        }
        ChartId::MachinesUpDown => {
            let n_up = up().count() as u64;
            fixed(&[("up", n_up), ("down", machines.len() as u64 - n_up)])
        }
        ChartId::JobsByOwner => tally(slots().filter_map(|s| s.owner().map(str::to_string))),
        ChartId::RunningVsSuspended => {
            let phase = |p| slots().filter(|s| s.phase() == Some(p)).count() as u64;
            fixed(&[
                ("running", phase(JobPhase::Running)),
                ("suspended", phase(JobPhase::Suspended)),
            ])
        }
        ChartId::FreeDiskHistogram => histogram(
            up().map(|m| m.info.attributes.disk_mb_free_total),
            &[1_000, 5_000, 20_000, 100_000],
            &["<1000", "1000-5000", "5000-20000", "20000-100000", ">=100000"],
        ),
        ChartId::MemoryHistogram => histogram(
            up().map(|m| m.info.attributes.memory_mb_total),
            &[2_048, 4_096, 8_192, 16_384],
            &["<2048", "2048-4096", "4096-8192", "8192-16384", ">=16384"],
        ),
        ChartId::LoadHistogram => histogram(
            up().map(|m| u64::from(m.info.attributes.load_avg_total.hundredths())),
            &LOAD_BOUNDS,
            &LOAD_LABELS,
        ),
        ChartId::CondorLoadHistogram => histogram(
            up().map(|m| u64::from(m.info.attributes.load_avg_condor.hundredths())),
            &LOAD_BOUNDS,
            &LOAD_LABELS,
        ),
        ChartId::SlotsPerMachine => {
            let mut m: BTreeMap<u32, u64> = BTreeMap::new();
            for machine in machines {
                *m.entry(machine.info.attributes.slot_count).or_default() += 1;
            }
            m.into_iter()
                .map(|(k, value)| ChartPoint {
                    label: k.to_string(),
                    value,
                })
                .collect()
        }
        ChartId::OsDistribution => tally(up().map(|m| {
            let a = &m.info.attributes;
            format!("{} {}", a.os_name, a.os_version).trim().to_string()
        })),
        ChartId::ActivityDistribution => {
            let counts: BTreeMap<SlotActivity, u64> = slots().fold(BTreeMap::new(), |mut acc, s| {
                *acc.entry(s.activity()).or_default() += 1;
                acc
            });
            SlotActivity::ALL
                .iter()
                .map(|a| ChartPoint {
                    label: a.to_string(),
                    value: counts.get(a).copied().unwrap_or(0),
                })
                .collect()
        }
        ChartId::TimeInStateHistogram => histogram(
            machines.iter().flat_map(|m| m.time_in_state_s.iter().copied()),
            &[300, 3_600, 21_600, 86_400],
            &["<5m", "5m-1h", "1h-6h", "6h-1d", ">=1d"],
        ),
        ChartId::SuspendedJobOwners => tally(
            slots()
                .filter(|s| s.phase() == Some(JobPhase::Suspended))
                .filter_map(|s| s.owner().map(str::to_string)),
        ),
        ChartId::RestrictedVsUnrestricted => {
            let restricted = machines.iter().filter(|m| m.info.restriction.is_some()).count() as u64;
            fixed(&[
                ("restricted", restricted),
                ("unrestricted", machines.len() as u64 - restricted),
            ])
        }
        ChartId::LastExecutionAgeHistogram => {
            let never = machines.iter().filter(|m| m.info.last_job_time.is_none()).count() as u64;
            let mut points = vec![ChartPoint {
                label: "never".into(),
                value: never,
            }];
            points.extend(histogram(
                machines
                    .iter()
                    .filter_map(|m| m.info.last_job_time)
                    .map(|t| (taken_at - t).num_seconds().max(0) as u64),
                &[3_600, 86_400, 604_800],
                &["<1h", "1h-1d", "1d-1w", ">=1w"],
            ));
            points
        }
    };
    ChartData {
        id,
        title: id.title(),
        kind: id.kind(),
        points,
    }
}
