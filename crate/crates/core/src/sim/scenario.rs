//! Scenario files: one `key = value` per line, `#` starts a comment.
//!
//! ```text
//! seed = 42
//! machines = 20
//! slots_per_machine = 4          # or one value per machine: 8,4,4,2
//! start = 2014-06-02T00:00:00Z   # UTC, whole seconds
//! duration_s = 604800
//! job_rate_per_slot_hour = 0.5   # arrivals while a slot is free
//! mean_job_length_s = 14400      # running time, suspensions excluded
//! owner_rate_per_machine_hour = 0.1
//! mean_owner_length_s = 3600
//! suspend_probability = 0.5      # for jobs on slots other than 1
//! restricted_fraction = 0.25
//! restriction = 5:00:00-23:59;6:00:00-23:59
//! users = alice,bob,carol
//! max_idle_per_user = 20
//! interval_s = 300               # sampling interval of emitted data roots
//! ```

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, TimeDelta};
use thiserror::Error;

use crate::model::{validate_text, ScheduleWindows, Timestamp};
use crate::record::{format_timestamp, parse_timestamp};

pub const MAX_DURATION_S: u64 = 366 * 86_400;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid scenario: {0}")]
pub struct InvalidScenario(pub String);

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub machines: u32,
    /// A single count for every machine, or one per machine.
    pub slots_per_machine: Vec<u32>,
    pub start: Timestamp,
    pub duration_s: u64,
    pub job_rate_per_slot_hour: f64,
    pub mean_job_length_s: f64,
    pub owner_rate_per_machine_hour: f64,
    pub mean_owner_length_s: f64,
    pub suspend_probability: f64,
    pub restricted_fraction: f64,
    pub restriction: ScheduleWindows,
    pub users: Vec<String>,
    pub max_idle_per_user: u32,
    pub interval_s: u32,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            seed: 1,
            machines: 4,
            slots_per_machine: vec![4],
            start: DateTime::from_timestamp(1_401_667_200, 0).expect("valid instant"),
            duration_s: 7 * 86_400,
            job_rate_per_slot_hour: 0.5,
            mean_job_length_s: 14_400.0,
            owner_rate_per_machine_hour: 0.1,
            mean_owner_length_s: 3600.0,
            suspend_probability: 0.5,
            restricted_fraction: 0.25,
            restriction: "5:00:00-23:59;6:00:00-23:59".parse().expect("valid schedule"),
            users: vec!["alice".into(), "bob".into(), "carol".into()],
            max_idle_per_user: 20,
            interval_s: 300,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), InvalidScenario> {
        let bad = |m: String| Err(InvalidScenario(m));
        if self.machines == 0 {
            return bad("machines must be at least 1".into());
        }
        let n = self.slots_per_machine.len();
        if n != 1 && n != self.machines as usize {
            return bad(format!("slots_per_machine has {n} values for {} machines", self.machines));
        }
        if self.slots_per_machine.contains(&0) {
            return bad("slot counts must be at least 1".into());
        }
        if self.duration_s == 0 || self.duration_s > MAX_DURATION_S {
            return bad(format!("duration_s must be within 1..={MAX_DURATION_S}"));
        }
        if self.start.timestamp_subsec_nanos() != 0 {
            return bad("start must be a whole second".into());
        }
        for (name, v) in [
            ("job_rate_per_slot_hour", self.job_rate_per_slot_hour),
            ("owner_rate_per_machine_hour", self.owner_rate_per_machine_hour),
        ] {
            if !v.is_finite() || v < 0.0 {
                return bad(format!("{name} must be a finite rate >= 0"));
            }
        }
        for (name, v) in [
            ("mean_job_length_s", self.mean_job_length_s),
            ("mean_owner_length_s", self.mean_owner_length_s),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return bad(format!("{name} must be positive"));
            }
        }
        for (name, v) in [
            ("suspend_probability", self.suspend_probability),
            ("restricted_fraction", self.restricted_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be within [0, 1]"));
            }
        }
        if self.users.is_empty() {
            return bad("at least one user is required".into());
        }
        let mut seen = HashSet::new();
        for u in &self.users {
            if validate_text(u).is_err() || u.contains(',') || u.trim() != u {
                return bad(format!("invalid user name {u:?}"));
            }
            if !seen.insert(u) {
                return bad(format!("duplicate user {u}"));
            }
        }
        if !(30..=3600).contains(&self.interval_s) {
            return bad("interval_s must be within 30..=3600".into());
        }
        Ok(())
    }

    pub fn slot_count(&self, machine: usize) -> u32 {
        if self.slots_per_machine.len() == 1 {
            self.slots_per_machine[0]
        } else {
            self.slots_per_machine[machine]
        }
    }

    pub fn end(&self) -> Timestamp {
        self.start + TimeDelta::seconds(self.duration_s as i64)
    }
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T, InvalidScenario> {
    v.parse().map_err(|_| InvalidScenario(format!("{key}: cannot parse {v:?}")))
}

impl FromStr for Scenario {
    type Err = InvalidScenario;

    /// Unset keys keep their defaults; unknown or repeated keys are errors.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut s = Scenario::default();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| InvalidScenario(format!("line {}: expected key = value", idx + 1)))?;
            if !seen.insert(key.to_string()) {
                return Err(InvalidScenario(format!("line {}: {key} given twice", idx + 1)));
            }
            match key {
                "seed" => s.seed = parse_value(key, value)?,
                "machines" => s.machines = parse_value(key, value)?,
                "slots_per_machine" => {
                    s.slots_per_machine = value
                        .split(',')
                        .map(|v| parse_value(key, v.trim()))
                        .collect::<Result<_, _>>()?
                }
                "start" => {
                    s.start = parse_timestamp(value)
                        .ok_or_else(|| InvalidScenario(format!("start: cannot parse {value:?}")))?
                }
                "duration_s" => s.duration_s = parse_value(key, value)?,
                "job_rate_per_slot_hour" => s.job_rate_per_slot_hour = parse_value(key, value)?,
                "mean_job_length_s" => s.mean_job_length_s = parse_value(key, value)?,
                "owner_rate_per_machine_hour" => s.owner_rate_per_machine_hour = parse_value(key, value)?,
                "mean_owner_length_s" => s.mean_owner_length_s = parse_value(key, value)?,
                "suspend_probability" => s.suspend_probability = parse_value(key, value)?,
                "restricted_fraction" => s.restricted_fraction = parse_value(key, value)?,
                "restriction" => s.restriction = parse_value(key, value)?,
                "users" => s.users = value.split(',').map(|u| u.trim().to_string()).collect(),
                "max_idle_per_user" => s.max_idle_per_user = parse_value(key, value)?,
                "interval_s" => s.interval_s = parse_value(key, value)?,
                _ => return Err(InvalidScenario(format!("line {}: unknown key {key}", idx + 1))),
            }
        }
        s.validate()?;
        Ok(s)
    }
}

impl fmt::Display for Scenario {
    /// Canonical text with every key set.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let slots: Vec<String> = self.slots_per_machine.iter().map(u32::to_string).collect();
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "machines = {}", self.machines)?;
        writeln!(f, "slots_per_machine = {}", slots.join(","))?;
        writeln!(f, "start = {}", format_timestamp(self.start))?;
        writeln!(f, "duration_s = {}", self.duration_s)?;
        writeln!(f, "job_rate_per_slot_hour = {}", self.job_rate_per_slot_hour)?;
        writeln!(f, "mean_job_length_s = {}", self.mean_job_length_s)?;
        writeln!(f, "owner_rate_per_machine_hour = {}", self.owner_rate_per_machine_hour)?;
        writeln!(f, "mean_owner_length_s = {}", self.mean_owner_length_s)?;
        writeln!(f, "suspend_probability = {}", self.suspend_probability)?;
        writeln!(f, "restricted_fraction = {}", self.restricted_fraction)?;
        writeln!(f, "restriction = {}", self.restriction)?;
        writeln!(f, "users = {}", self.users.join(","))?;
        writeln!(f, "max_idle_per_user = {}", self.max_idle_per_user)?;
        writeln!(f, "interval_s = {}", self.interval_s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let s: Scenario = "# pool\nseed = 9\nmachines=3\nslots_per_machine = 8,4,2 # mixed\n".parse().unwrap();
        assert_eq!(s.seed, 9);
        assert_eq!((s.slot_count(0), s.slot_count(2)), (8, 2));
        assert_eq!(s.users, Scenario::default().users);
    }

    #[test]
    fn canonical_text_round_trips() {
        let s = Scenario {
            seed: 77,
            job_rate_per_slot_hour: 0.125,
            restriction: ScheduleWindows::default(),
            ..Scenario::default()
        };
        assert_eq!(s.to_string().parse::<Scenario>().unwrap(), s);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "bogus = 1",
            "seed = 1\nseed = 2",
            "machines = 0",
            "machines = 3\nslots_per_machine = 4,4",
            "slots_per_machine = 0",
            "duration_s = 0",
            "job_rate_per_slot_hour = -1",
            "mean_job_length_s = 0",
            "suspend_probability = 1.5",
            "users = alice,alice",
            "users =",
            "interval_s = 10",
            "start = yesterday",
            "seed",
        ] {
            assert!(text.parse::<Scenario>().is_err(), "{text}");
        }
    }
}
