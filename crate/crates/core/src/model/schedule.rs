use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, FixedOffset, Timelike};
use serde::{Serialize, Serializer};
use thiserror::Error;

use super::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid schedule {input:?}: {reason}")]
pub struct ScheduleParseError {
    pub input: String,
    pub reason: &'static str,
}

/// Minute of the day, `00:00` to `23:59`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimeOfDay(u16);

impl TimeOfDay {
    pub fn new(hour: u8, minute: u8) -> Option<Self> {
        (hour < 24 && minute < 60).then(|| TimeOfDay(u16::from(hour) * 60 + u16::from(minute)))
    }

    pub fn minute_of_day(self) -> u16 {
        self.0
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.0 / 60, self.0 % 60)
    }
}

impl FromStr for TimeOfDay {
    type Err = ScheduleParseError;

    /// Strict `HH:MM`, both fields zero-padded.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason| ScheduleParseError {
            input: s.to_string(),
            reason,
        };
        let b = s.as_bytes();
        if b.len() != 5 || b[2] != b':' || ![0, 1, 3, 4].iter().all(|&i| b[i].is_ascii_digit()) {
            return Err(err("expected HH:MM"));
        }
        let hour = (b[0] - b'0') * 10 + (b[1] - b'0');
        let minute = (b[3] - b'0') * 10 + (b[4] - b'0');
        TimeOfDay::new(hour, minute).ok_or_else(|| err("time out of range"))
    }
}

impl Serialize for TimeOfDay {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// A weekly window. `day` is 0 for Monday through 6 for Sunday. Both ends
/// are inclusive at minute resolution, so `00:00-23:59` covers a whole day.
/// When `end < start` the window runs past midnight into the following day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Window {
    pub day: u8,
    pub start: TimeOfDay,
    pub end: TimeOfDay,
}

impl Window {
    pub fn new(day: u8, start: TimeOfDay, end: TimeOfDay) -> Option<Self> {
        (day < 7).then_some(Window { day, start, end })
    }

    pub fn wraps(&self) -> bool {
        self.end < self.start
    }

    /// Membership for a local (day-of-week, minute-of-day) pair.
    fn contains(&self, day: u8, minute: u16) -> bool {
        let (s, e) = (self.start.0, self.end.0);
        if !self.wraps() {
            day == self.day && (s..=e).contains(&minute)
        } else {
            (day == self.day && minute >= s) || (day == (self.day + 1) % 7 && minute <= e)
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}-{}", self.day, self.start, self.end)
    }
}

impl FromStr for Window {
    type Err = ScheduleParseError;

    /// `d:HH:MM-HH:MM`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason| ScheduleParseError {
            input: s.to_string(),
            reason,
        };
        let (day, rest) = s.split_once(':').ok_or_else(|| err("missing day"))?;
        if day.len() != 1 {
            return Err(err("day must be a single digit 0-6"));
        }
        let day: u8 = day.parse().map_err(|_| err("day must be a single digit 0-6"))?;
        let (start, end) = rest.split_once('-').ok_or_else(|| err("missing '-'"))?;
        Window::new(day, start.parse()?, end.parse()?).ok_or_else(|| err("day must be 0-6"))
    }
}

/// Weekly windows during which a machine accepts jobs. An empty list means
/// jobs are never allowed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(transparent)]
pub struct ScheduleWindows {
    pub windows: Vec<Window>,
}

impl ScheduleWindows {
    pub fn new(windows: Vec<Window>) -> Self {
        ScheduleWindows { windows }
    }

    /// Whether `t`, seen in the pool time zone `tz`, falls in any window.
    pub fn allows(&self, t: Timestamp, tz: FixedOffset) -> bool {
        let local = t.with_timezone(&tz);
        let day = local.weekday().num_days_from_monday() as u8;
        let minute = (local.hour() * 60 + local.minute()) as u16;
        self.windows.iter().any(|w| w.contains(day, minute))
    }
}

/// Evaluates a restriction in UTC.
pub fn schedule_allows(r: &ScheduleWindows, t: Timestamp) -> bool {
    r.allows(t, FixedOffset::east_opt(0).expect("zero offset"))
}

impl fmt::Display for ScheduleWindows {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, w) in self.windows.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{w}")?;
        }
        Ok(())
    }
}

impl FromStr for ScheduleWindows {
    type Err = ScheduleParseError;

    /// `;`-joined windows. The empty string is the empty schedule.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Ok(ScheduleWindows::default());
        }
        s.split(';')
            .map(str::parse)
            .collect::<Result<Vec<_>, _>>()
            .map(ScheduleWindows::new)
    }
}
