//! Harvested-power supply model, issue throttling and cut injection.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::Phase;
use crate::error::{Error, Result};

pub const DEFAULT_FREQUENCY_HZ: f64 = 16_000.0;
pub const DEFAULT_BUDGET_W: f64 = 200e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    /// On for the first `duty` fraction of every period, starting at t = 0.
    SquareWave { frequency: f64, duty: f64 },
    /// Sorted, disjoint `[on_start, on_end)` intervals in seconds.
    Explicit { intervals: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTrace {
    pub kind: TraceKind,
    /// Power available while on. Informational; throttling uses the budget.
    pub on_power: f64,
}

impl PowerTrace {
    pub fn square(frequency: f64, duty: f64) -> Result<Self> {
        let t = PowerTrace {
            kind: TraceKind::SquareWave { frequency, duty },
            on_power: DEFAULT_BUDGET_W,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn continuous() -> Self {
        Self::square(DEFAULT_FREQUENCY_HZ, 1.0).expect("valid")
    }

    pub fn explicit(intervals: Vec<(f64, f64)>) -> Result<Self> {
        let t = PowerTrace {
            kind: TraceKind::Explicit { intervals },
            on_power: DEFAULT_BUDGET_W,
        };
        t.validate()?;
        Ok(t)
    }

    /// Reads `on_start,on_end` rows (seconds); a header row is optional.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::PowerTrace(e.to_string()))?;
        let mut intervals = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::PowerTrace(e.to_string()))?;
            if rec.len() != 2 {
                return Err(Error::PowerTrace(format!(
                    "row {}: expected 2 fields, got {}",
                    i + 1,
                    rec.len()
                )));
            }
            let parsed: std::result::Result<Vec<f64>, _> =
                rec.iter().map(|f| f.parse::<f64>()).collect();
            match parsed {
                Ok(v) => intervals.push((v[0], v[1])),
                Err(_) if i == 0 => continue,
                Err(e) => return Err(Error::PowerTrace(format!("row {}: {e}", i + 1))),
            }
        }
        Self::explicit(intervals)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            TraceKind::SquareWave { frequency, duty } => {
                if !(*frequency > 0.0 && frequency.is_finite()) {
                    return Err(Error::PowerTrace(format!("frequency must be > 0, got {frequency}")));
                }
                if !(*duty > 0.0 && *duty <= 1.0) {
                    return Err(Error::PowerTrace(format!("duty must be in (0, 1], got {duty}")));
                }
            }
            TraceKind::Explicit { intervals } => {
                let mut prev_end = f64::NEG_INFINITY;
                for &(s, e) in intervals {
                    if !(s >= 0.0 && e > s) {
                        return Err(Error::PowerTrace(format!("bad interval [{s}, {e})")));
                    }
                    if s < prev_end {
                        return Err(Error::PowerTrace("intervals must be sorted and disjoint".into()));
                    }
                    prev_end = e;
                }
            }
        }
        if !(self.on_power >= 0.0) {
            return Err(Error::PowerTrace("on_power must be >= 0".into()));
        }
        Ok(())
    }

    pub fn duty(&self) -> Option<f64> {
        match self.kind {
            TraceKind::SquareWave { duty, .. } => Some(duty),
            TraceKind::Explicit { .. } => None,
        }
    }

    pub fn is_on(&self, t: f64) -> bool {
        match &self.kind {
            TraceKind::SquareWave { frequency, duty } => {
                if *duty >= 1.0 {
                    return true;
                }
                let p = 1.0 / frequency;
                let k = cycle(t, p);
                t < k * p + duty * p
            }
            TraceKind::Explicit { intervals } => intervals.iter().any(|&(s, e)| s <= t && t < e),
        }
    }

    /// Next on/off transition strictly after `t`; infinite if none.
    pub fn next_edge(&self, t: f64) -> f64 {
        match &self.kind {
            TraceKind::SquareWave { frequency, duty } => {
                if *duty >= 1.0 {
                    return f64::INFINITY;
                }
                let p = 1.0 / frequency;
                let k = cycle(t, p);
                let fall = k * p + duty * p;
                if t < fall {
                    fall
                } else {
                    (k + 1.0) * p
                }
            }
            TraceKind::Explicit { intervals } => intervals
                .iter()
                .flat_map(|&(s, e)| [s, e])
                .find(|&x| x > t)
                .unwrap_or(f64::INFINITY),
        }
    }

    /// When power next fails, for a time `t` at which it is on.
    pub fn next_off(&self, t: f64) -> f64 {
        match &self.kind {
            TraceKind::SquareWave { duty, .. } if *duty >= 1.0 => f64::INFINITY,
            TraceKind::SquareWave { .. } => self.next_edge(t),
            TraceKind::Explicit { intervals } => intervals
                .iter()
                .find(|&&(s, e)| s <= t && t < e)
                .map(|&(_, e)| e)
                .unwrap_or(t),
        }
    }

    /// Earliest time at or after `t` with power on.
    pub fn next_on(&self, t: f64) -> Option<f64> {
        if self.is_on(t) {
            return Some(t);
        }
        match &self.kind {
            TraceKind::SquareWave { .. } => Some(self.next_edge(t)),
            TraceKind::Explicit { intervals } => {
                intervals.iter().find(|&&(s, _)| s > t).map(|&(s, _)| s)
            }
        }
    }

    /// First scheduled on-edge strictly after `t`. A forced outage lasts
    /// until then, even when the wave itself has no off phase.
    pub fn next_rising_edge(&self, t: f64) -> Option<f64> {
        match &self.kind {
            TraceKind::SquareWave { frequency, .. } => {
                let p = 1.0 / frequency;
                Some((cycle(t, p) + 1.0) * p)
            }
            TraceKind::Explicit { intervals } => {
                intervals.iter().find(|&&(s, _)| s > t).map(|&(s, _)| s)
            }
        }
    }

    /// Total on-time in `[0, t)`.
    pub fn on_time_until(&self, t: f64) -> f64 {
        match &self.kind {
            TraceKind::SquareWave { frequency, duty } => {
                let p = 1.0 / frequency;
                let k = cycle(t, p);
                k * duty * p + (t - k * p).min(duty * p)
            }
            TraceKind::Explicit { intervals } => intervals
                .iter()
                .map(|&(s, e)| (e.min(t) - s).max(0.0))
                .sum(),
        }
    }
}

/// Index `k` of the period holding `t`, with `k * p <= t < (k + 1) * p`
/// as evaluated in floating point.
fn cycle(t: f64, p: f64) -> f64 {
    let mut k = (t / p).floor();
    if k * p > t {
        k -= 1.0;
    } else if (k + 1.0) * p <= t {
        k += 1.0;
    }
    k
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThrottleMode {
    /// One issue period for the whole program.
    #[default]
    Static,
    PerInstruction,
    /// Issue at the base period regardless of energy.
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThrottlePolicy {
    pub budget: f64,
    pub mode: ThrottleMode,
}

impl Default for ThrottlePolicy {
    fn default() -> Self {
        ThrottlePolicy {
            budget: DEFAULT_BUDGET_W,
            mode: ThrottleMode::Static,
        }
    }
}

impl ThrottlePolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.budget > 0.0) {
            return Err(Error::Config(format!("budget must be > 0, got {}", self.budget)));
        }
        Ok(())
    }
}

/// `max(base, energy / budget)`, or `base` with throttling off.
pub fn issue_period(energy: f64, base: f64, policy: &ThrottlePolicy) -> f64 {
    match policy.mode {
        ThrottleMode::Off => base,
        _ => base.max(energy / policy.budget),
    }
}

/// Issue period for a slot that idles first and then runs `phases`
/// (latency, energy) back to back.
///
/// Besides `max(base, energy / budget)` the period is stretched until the
/// energy drawn by the end of every phase stays within `budget` times the
/// time elapsed since the slot began, so an outage at any instant finds the
/// draw inside the budget.
pub fn paced_period(phases: &[(f64, f64)], base: f64, policy: &ThrottlePolicy) -> f64 {
    let busy: f64 = phases.iter().map(|p| p.0).sum();
    if policy.mode == ThrottleMode::Off {
        return base.max(busy);
    }
    let total: f64 = phases.iter().map(|p| p.1).sum();
    let mut need = issue_period(total, base, policy).max(busy);
    let (mut l, mut e) = (0.0, 0.0);
    for &(lat, en) in phases {
        l += lat;
        e += en;
        need = need.max(busy - l + e / policy.budget);
    }
    need
}

/// Where to force a single outage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutSpec {
    /// During the first execution of the instruction at `pc`, after
    /// `fraction` of `phase` has elapsed.
    At { pc: u32, phase: Phase, fraction: f64 },
    /// At a wall-clock time in seconds.
    Time(f64),
}

impl std::fmt::Display for CutSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CutSpec::At { pc, phase, fraction } => write!(f, "pc={pc} {phase:?}@{fraction}"),
            CutSpec::Time(t) => write!(f, "t={t}s"),
        }
    }
}
