//! Time and energy ledger split into intermittent-computing categories.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    Productive,
    /// Saving architectural state: PC, parity, stored activation.
    Backup,
    /// Re-performing work lost to an outage.
    Dead,
    /// Preparing to resume after an outage.
    Restore,
}

/// Seconds and joules.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub total_t: f64,
    pub restore_t: f64,
    pub total_e: f64,
    pub backup_e: f64,
    pub dead_e: f64,
    pub restore_e: f64,
    pub productive_e: f64,
    pub instructions: u64,
    pub re_executed: u64,
    pub restarts: u64,
}

impl EnergyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, category: Category, energy: f64, time: f64) -> Result<()> {
        if !(energy >= 0.0) {
            return Err(Error::NegativeCharge("energy"));
        }
        if !(time >= 0.0) {
            return Err(Error::NegativeCharge("time"));
        }
        match category {
            Category::Productive => self.productive_e += energy,
            Category::Backup => self.backup_e += energy,
            Category::Dead => self.dead_e += energy,
            Category::Restore => {
                self.restore_e += energy;
                self.restore_t += time;
            }
        }
        self.total_e += energy;
        self.total_t += time;
        Ok(())
    }

    /// Wall-clock time that passes with no energy, e.g. idle slack or an outage.
    pub fn advance(&mut self, time: f64) -> Result<()> {
        self.charge(Category::Productive, 0.0, time)
    }

    pub fn category_energy(&self, c: Category) -> f64 {
        match c {
            Category::Productive => self.productive_e,
            Category::Backup => self.backup_e,
            Category::Dead => self.dead_e,
            Category::Restore => self.restore_e,
        }
    }

    /// Sum of the category energies, recomputed.
    pub fn category_sum(&self) -> f64 {
        self.productive_e + self.backup_e + self.dead_e + self.restore_e
    }

    /// Additivity up to floating-point rounding.
    pub fn is_consistent(&self) -> bool {
        let sum = self.category_sum();
        let tol = 1e-9 * self.total_e.abs().max(sum.abs()) + f64::MIN_POSITIVE;
        (sum - self.total_e).abs() <= tol
            && [
                self.total_t,
                self.restore_t,
                self.backup_e,
                self.dead_e,
                self.restore_e,
                self.productive_e,
            ]
            .iter()
            .all(|&x| x >= 0.0)
            && self.restore_t <= self.total_t * (1.0 + 1e-12)
    }

    pub fn merge(&mut self, other: &EnergyLedger) {
        self.total_t += other.total_t;
        self.restore_t += other.restore_t;
        self.total_e += other.total_e;
        self.backup_e += other.backup_e;
        self.dead_e += other.dead_e;
        self.restore_e += other.restore_e;
        self.productive_e += other.productive_e;
        self.instructions += other.instructions;
        self.re_executed += other.re_executed;
        self.restarts += other.restarts;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::Config(format!("unknown report format `{s}`"))),
        }
    }
}

pub const CSV_HEADER: &str = "Duty,TotalT,RestoreT,TotalE,BackupE,DeadE,RestoreE";

/// One report line in microseconds and microjoules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct ReportRow {
    pub duty: f64,
    pub total_t: f64,
    pub restore_t: f64,
    pub total_e: f64,
    pub backup_e: f64,
    pub dead_e: f64,
    pub restore_e: f64,
    pub productive_e: f64,
    pub instructions: u64,
    pub re_executed: u64,
    pub restarts: u64,
}

impl ReportRow {
    pub fn new(duty: f64, l: &EnergyLedger) -> Self {
        const US: f64 = 1e6;
        const UJ: f64 = 1e6;
        ReportRow {
            duty,
            total_t: l.total_t * US,
            restore_t: l.restore_t * US,
            total_e: l.total_e * UJ,
            backup_e: l.backup_e * UJ,
            dead_e: l.dead_e * UJ,
            restore_e: l.restore_e * UJ,
            productive_e: l.productive_e * UJ,
            instructions: l.instructions,
            re_executed: l.re_executed,
            restarts: l.restarts,
        }
    }
}

pub fn report(rows: &[ReportRow], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut s = String::from(CSV_HEADER);
            s.push('\n');
            for r in rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    r.duty, r.total_t, r.restore_t, r.total_e, r.backup_e, r.dead_e, r.restore_e
                );
            }
            s
        }
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(rows).expect("plain data serializes");
            s.push('\n');
            s
        }
    }
}

pub fn parse_json_report(text: &str) -> Result<Vec<ReportRow>> {
    serde_json::from_str(text).map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_is_zero() {
        let l = EnergyLedger::new();
        assert_eq!(l.total_e, 0.0);
        assert_eq!(l.total_t, 0.0);
        assert!(l.is_consistent());
    }

    #[test]
    fn backup_accumulates() {
        let mut l = EnergyLedger::new();
        l.charge(Category::Backup, 1e-12, 0.0).unwrap();
        l.charge(Category::Backup, 1e-12, 0.0).unwrap();
        assert_eq!(l.backup_e, 2e-12);
        assert!(matches!(
            l.charge(Category::Dead, -1.0, 0.0),
            Err(Error::NegativeCharge("energy"))
        ));
        assert!(l.charge(Category::Dead, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn restore_time_only_for_restore() {
        let mut l = EnergyLedger::new();
        l.charge(Category::Productive, 1.0, 2.0).unwrap();
        l.charge(Category::Restore, 1.0, 3.0).unwrap();
        assert_eq!(l.total_t, 5.0);
        assert_eq!(l.restore_t, 3.0);
    }

    #[test]
    fn csv_header_and_units() {
        let mut l = EnergyLedger::new();
        l.charge(Category::Productive, 2e-6, 3e-6).unwrap();
        let csv = report(&[ReportRow::new(1.0, &l)], ReportFormat::Csv);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.next(), Some("1,3,0,2,0,0,0"));
    }

    #[test]
    fn json_round_trip() {
        let mut l = EnergyLedger::new();
        l.charge(Category::Dead, 1.25e-7, 1e-3).unwrap();
        l.instructions = 7;
        let rows = vec![ReportRow::new(0.25, &l)];
        let text = report(&rows, ReportFormat::Json);
        assert_eq!(parse_json_report(&text).unwrap(), rows);
        assert_eq!(report(&rows, ReportFormat::Json), text);
    }

    proptest! {
        #[test]
        fn additivity_holds(charges in prop::collection::vec((0u8..4, 0.0f64..1e-6, 0.0f64..1e-3), 0..50)) {
            let mut l = EnergyLedger::new();
            for (c, e, t) in charges {
                let cat = [Category::Productive, Category::Backup, Category::Dead, Category::Restore][c as usize];
                l.charge(cat, e, t).unwrap();
            }
            prop_assert!(l.is_consistent());
            let mut m = l;
            m.merge(&l);
            prop_assert!(m.is_consistent());
        }
    }
}
