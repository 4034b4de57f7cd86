use chrono::NaiveDate;
use serde::Serialize;

use super::ModelError;

pub const DAY_S: u64 = 86_400;

/// The five accounting figures of a machine over some span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct UsageTotals {
    pub theoretical_s: u64,
    pub owner_idle_s: u64,
    pub condor_total_s: u64,
    pub running_s: u64,
    pub suspended_s: u64,
}

impl UsageTotals {
    fn add(&mut self, other: &UsageTotals) {
        self.theoretical_s += other.theoretical_s;
        self.owner_idle_s += other.owner_idle_s;
        self.condor_total_s += other.condor_total_s;
        self.running_s += other.running_s;
        self.suspended_s += other.suspended_s;
    }

    fn scaled(&self, divisor: f64) -> UsageFigures {
        let d = |v: u64| v as f64 / divisor;
        UsageFigures {
            theoretical_s: d(self.theoretical_s),
            owner_idle_s: d(self.owner_idle_s),
            condor_total_s: d(self.condor_total_s),
            running_s: d(self.running_s),
            suspended_s: d(self.suspended_s),
        }
    }

    fn percentages(&self) -> UsageFigures {
        if self.theoretical_s == 0 {
            return UsageFigures::default();
        }
        let mut p = self.scaled(self.theoretical_s as f64 / 100.0);
        p.theoretical_s = 100.0;
        p
    }
}

/// Real-valued counterpart of [`UsageTotals`], used for averages and
/// percentages. For percentages the field names keep their `_s` suffix but
/// hold percent of theoretical time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct UsageFigures {
    pub theoretical_s: f64,
    pub owner_idle_s: f64,
    pub condor_total_s: f64,
    pub running_s: f64,
    pub suspended_s: f64,
}

/// One row of the daily table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub label: &'static str,
    pub total_s: u64,
    pub avg_per_slot_s: f64,
    pub pct: f64,
}

/// Accounting for one machine over one UTC day.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DailySummary {
    machine: String,
    date: NaiveDate,
    slot_count: u32,
    theoretical_s: u64,
    owner_idle_s: u64,
    condor_total_s: u64,
    running_s: u64,
    suspended_s: u64,
    owner_idle_avg_per_slot_s: f64,
    condor_total_avg_per_slot_s: f64,
    running_avg_per_slot_s: f64,
    suspended_avg_per_slot_s: f64,
    owner_idle_pct: f64,
    condor_total_pct: f64,
    running_pct: f64,
    suspended_pct: f64,
}

impl DailySummary {
    /// Derives every figure from the measured running and suspended time.
    pub fn new(
        machine: impl Into<String>,
        date: NaiveDate,
        slot_count: u32,
        running_s: u64,
        suspended_s: u64,
    ) -> Result<Self, ModelError> {
        if slot_count == 0 {
            return Err(ModelError::ZeroSlotCount);
        }
        let theoretical_s = u64::from(slot_count) * DAY_S;
        let condor_total_s = running_s + suspended_s;
        if condor_total_s > theoretical_s {
            return Err(ModelError::InvalidSummary(format!(
                "condor time {condor_total_s} s exceeds theoretical {theoretical_s} s"
            )));
        }
        let owner_idle_s = theoretical_s - condor_total_s;
        let per_slot = |v: u64| v as f64 / f64::from(slot_count);
        let pct = |v: u64| v as f64 * 100.0 / theoretical_s as f64;
        Ok(DailySummary {
            machine: machine.into(),
            date,
            slot_count,
            theoretical_s,
            owner_idle_s,
            condor_total_s,
            running_s,
            suspended_s,
            owner_idle_avg_per_slot_s: per_slot(owner_idle_s),
            condor_total_avg_per_slot_s: per_slot(condor_total_s),
            running_avg_per_slot_s: per_slot(running_s),
            suspended_avg_per_slot_s: per_slot(suspended_s),
            owner_idle_pct: pct(owner_idle_s),
            condor_total_pct: pct(condor_total_s),
            running_pct: pct(running_s),
            suspended_pct: pct(suspended_s),
        })
    }

    pub fn machine(&self) -> &str {
        &self.machine
    }
    pub fn date(&self) -> NaiveDate {
        self.date
    }
    pub fn slot_count(&self) -> u32 {
        self.slot_count
    }
    pub fn theoretical_s(&self) -> u64 {
        self.theoretical_s
    }
    pub fn owner_idle_s(&self) -> u64 {
        self.owner_idle_s
    }
    pub fn condor_total_s(&self) -> u64 {
        self.condor_total_s
    }
    pub fn running_s(&self) -> u64 {
        self.running_s
    }
    pub fn suspended_s(&self) -> u64 {
        self.suspended_s
    }
    pub fn owner_idle_pct(&self) -> f64 {
        self.owner_idle_pct
    }
    pub fn condor_total_pct(&self) -> f64 {
        self.condor_total_pct
    }
    pub fn running_pct(&self) -> f64 {
        self.running_pct
    }
    pub fn suspended_pct(&self) -> f64 {
        self.suspended_pct
    }

    pub fn totals(&self) -> UsageTotals {
        UsageTotals {
            theoretical_s: self.theoretical_s,
            owner_idle_s: self.owner_idle_s,
            condor_total_s: self.condor_total_s,
            running_s: self.running_s,
            suspended_s: self.suspended_s,
        }
    }

    /// Table rows in display order: theoretical maximum, owner/idle, condor
    /// total, running, suspended.
    pub fn table_rows(&self) -> [SummaryRow; 5] {
        let slots = f64::from(self.slot_count);
        [
            SummaryRow {
                label: "theoretical",
                total_s: self.theoretical_s,
                avg_per_slot_s: self.theoretical_s as f64 / slots,
                pct: 100.0,
            },
            SummaryRow {
                label: "owner_idle",
                total_s: self.owner_idle_s,
                avg_per_slot_s: self.owner_idle_avg_per_slot_s,
                pct: self.owner_idle_pct,
            },
            SummaryRow {
                label: "condor_total",
                total_s: self.condor_total_s,
                avg_per_slot_s: self.condor_total_avg_per_slot_s,
                pct: self.condor_total_pct,
            },
            SummaryRow {
                label: "running",
                total_s: self.running_s,
                avg_per_slot_s: self.running_avg_per_slot_s,
                pct: self.running_pct,
            },
            SummaryRow {
                label: "suspended",
                total_s: self.suspended_s,
                avg_per_slot_s: self.suspended_avg_per_slot_s,
                pct: self.suspended_pct,
            },
        ]
    }
}

/// Accounting over a week or a calendar month starting at `start_date`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodSummary {
    machine: String,
    start_date: NaiveDate,
    span_days: u32,
    slot_count: u32,
    per_day: Vec<DailySummary>,
    totals: UsageTotals,
    totals_pct: UsageFigures,
    avg_per_day_s: UsageFigures,
    avg_per_day_slot_s: UsageFigures,
}

impl PeriodSummary {
    /// `per_day` must hold one summary per consecutive day from `start_date`.
    pub fn new(
        machine: impl Into<String>,
        start_date: NaiveDate,
        per_day: Vec<DailySummary>,
    ) -> Result<Self, ModelError> {
        let machine = machine.into();
        let bad = |m: String| Err(ModelError::InvalidSummary(m));
        let Some(first) = per_day.first() else {
            return bad("period has no days".into());
        };
        let slot_count = first.slot_count;
        let mut totals = UsageTotals::default();
        for (i, day) in per_day.iter().enumerate() {
            let expected = start_date + chrono::Days::new(i as u64);
            if day.date != expected || day.machine != machine || day.slot_count != slot_count {
                return bad(format!("day {i} does not continue the period"));
            }
            totals.add(&day.totals());
        }
        let span_days = per_day.len() as u32;
        let avg_per_day_s = totals.scaled(f64::from(span_days));
        let avg_per_day_slot_s = totals.scaled(f64::from(span_days) * f64::from(slot_count));
        Ok(PeriodSummary {
            machine,
            start_date,
            span_days,
            slot_count,
            totals_pct: totals.percentages(),
            per_day,
            totals,
            avg_per_day_s,
            avg_per_day_slot_s,
        })
    }

    pub fn machine(&self) -> &str {
        &self.machine
    }
    pub fn start_date(&self) -> NaiveDate {
        self.start_date
    }
    pub fn span_days(&self) -> u32 {
        self.span_days
    }
    pub fn slot_count(&self) -> u32 {
        self.slot_count
    }
    pub fn per_day(&self) -> &[DailySummary] {
        &self.per_day
    }
    pub fn totals(&self) -> UsageTotals {
        self.totals
    }
    pub fn totals_pct(&self) -> UsageFigures {
        self.totals_pct
    }
    pub fn avg_per_day_s(&self) -> UsageFigures {
        self.avg_per_day_s
    }
    pub fn avg_per_day_slot_s(&self) -> UsageFigures {
        self.avg_per_day_slot_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct QueueCounts {
    pub running: u64,
    pub idle: u64,
    pub held: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QueueRow {
    pub user: String,
    #[serde(flatten)]
    pub counts: QueueCounts,
}

/// Live per-user job counts with a totals row.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct QueueSummary {
    rows: Vec<QueueRow>,
    totals: QueueCounts,
}

impl QueueSummary {
    pub fn from_rows(rows: Vec<QueueRow>) -> Self {
        let totals = rows.iter().fold(QueueCounts::default(), |acc, r| QueueCounts {
            running: acc.running + r.counts.running,
            idle: acc.idle + r.counts.idle,
            held: acc.held + r.counts.held,
        });
        QueueSummary { rows, totals }
    }

    pub fn rows(&self) -> &[QueueRow] {
        &self.rows
    }

    pub fn totals(&self) -> QueueCounts {
        self.totals
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn june(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2014, 6, d).unwrap()
    }

    #[test]
    fn empty_day_on_eight_slots() {
        let s = DailySummary::new("epico", june(2), 8, 0, 0).unwrap();
        assert_eq!(s.theoretical_s(), 691_200);
        assert_eq!(s.owner_idle_s(), 691_200);
        assert_eq!(s.owner_idle_pct(), 100.0);
        assert_eq!(s.running_s() + s.suspended_s(), 0);
        let labels: Vec<_> = s.table_rows().iter().map(|r| r.label).collect();
        assert_eq!(
            labels,
            ["theoretical", "owner_idle", "condor_total", "running", "suspended"]
        );
    }

    #[test]
    fn one_slot_hour_and_ten_minutes() {
        let s = DailySummary::new("m", june(2), 1, 3600, 600).unwrap();
        assert_eq!(s.owner_idle_s(), 82_200);
        assert_eq!(s.condor_total_s(), 4200);
        assert!((s.owner_idle_pct() - 95.14).abs() < 0.005);
        assert!((s.running_pct() - 4.17).abs() < 0.005);
        assert!((s.suspended_pct() - 0.69).abs() < 0.005);
        let sum = s.owner_idle_pct() + s.running_pct() + s.suspended_pct();
        assert!((sum - 100.0).abs() <= 0.01);
    }

    #[test]
    fn overfull_day_rejected() {
        assert!(DailySummary::new("m", june(2), 1, 86_400, 1).is_err());
        assert!(DailySummary::new("m", june(2), 0, 0, 0).is_err());
    }

    #[test]
    fn period_totals_and_averages() {
        let days: Vec<_> = (2..9)
            .map(|d| DailySummary::new("renta", june(d), 4, 3600, 0).unwrap())
            .collect();
        let p = PeriodSummary::new("renta", june(2), days).unwrap();
        assert_eq!(p.span_days(), 7);
        assert_eq!(p.totals().running_s, 25_200);
        assert_eq!(p.avg_per_day_s().running_s, 3600.0);
        assert_eq!(p.avg_per_day_slot_s().running_s, 900.0);
        assert_eq!(p.totals().theoretical_s, 7 * 4 * 86_400);
    }

    #[test]
    fn period_rejects_gaps() {
        let days = vec![
            DailySummary::new("m", june(2), 4, 0, 0).unwrap(),
            DailySummary::new("m", june(4), 4, 0, 0).unwrap(),
        ];
        assert!(PeriodSummary::new("m", june(2), days).is_err());
    }

    #[test]
    fn queue_totals_are_column_sums() {
        let q = QueueSummary::from_rows(vec![
            QueueRow {
                user: "alice".into(),
                counts: QueueCounts { running: 5, idle: 10, held: 0 },
            },
            QueueRow {
                user: "bob".into(),
                counts: QueueCounts { running: 2, idle: 0, held: 1 },
            },
        ]);
        assert_eq!(q.totals(), QueueCounts { running: 7, idle: 10, held: 1 });
    }
}
