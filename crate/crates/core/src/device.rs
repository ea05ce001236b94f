//! MTJ cells, threshold-logic gate semantics and per-operation costs.
//!
//! A gate is a set of input MTJs wired in parallel, in series with the output
//! MTJ. The drive current through that path depends on the input resistances,
//! and the output only switches when the current exceeds the switching
//! threshold. Current direction fixes which way the output can switch, so a
//! gate can only ever move its output towards one target value.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Magnetic state of a tunnel junction. `P` is low resistance (logic 0),
/// `AP` is high resistance (logic 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MtjState {
    P,
    AP,
}

impl MtjState {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            MtjState::AP
        } else {
            MtjState::P
        }
    }

    pub fn bit(self) -> bool {
        matches!(self, MtjState::AP)
    }

    pub fn resistance(self, params: &DeviceParams) -> f64 {
        match self {
            MtjState::P => params.r_p,
            MtjState::AP => params.r_ap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technology {
    ModernStt,
    FutureStt,
    FutureShe,
}

impl Technology {
    pub fn variant(self) -> CellVariant {
        match self {
            Technology::ModernStt | Technology::FutureStt => CellVariant::Stt,
            Technology::FutureShe => CellVariant::She,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Technology::ModernStt => "modern_stt",
            Technology::FutureStt => "future_stt",
            Technology::FutureShe => "future_she",
        }
    }
}

impl FromStr for Technology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "modern_stt" | "modernstt" => Ok(Technology::ModernStt),
            "future_stt" | "futurestt" => Ok(Technology::FutureStt),
            "future_she" | "futureshe" => Ok(Technology::FutureShe),
            _ => Err(Error::DeviceParams(format!("unknown technology `{s}`"))),
        }
    }
}

/// Cell flavour. STT cells switch by current through the MTJ itself and need
/// output presets; SHE cells write through a separate spin-Hall channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellVariant {
    Stt,
    She,
}

/// Electrical and timing parameters of one MTJ technology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Ohms.
    pub r_p: f64,
    /// Ohms.
    pub r_ap: f64,
    /// Seconds.
    pub t_switch: f64,
    /// Amperes.
    pub i_switch: f64,
    /// Ohms, per access transistor in a conduction path.
    pub r_transistor: f64,
    /// Ohms, SHE variant only.
    pub r_she_channel: Option<f64>,
    pub technology: Technology,
}

pub const DEFAULT_TRANSISTOR_OHMS: f64 = 1.0e3;
pub const DEFAULT_SHE_CHANNEL_OHMS: f64 = 1.0e3;

impl DeviceParams {
    pub fn modern_stt() -> Self {
        DeviceParams {
            r_p: 3.15e3,
            r_ap: 7.34e3,
            t_switch: 3e-9,
            i_switch: 40e-6,
            r_transistor: DEFAULT_TRANSISTOR_OHMS,
            r_she_channel: None,
            technology: Technology::ModernStt,
        }
    }

    pub fn future_stt() -> Self {
        DeviceParams {
            r_p: 7.34e3,
            r_ap: 76.39e3,
            t_switch: 1e-9,
            i_switch: 3e-6,
            r_transistor: DEFAULT_TRANSISTOR_OHMS,
            r_she_channel: None,
            technology: Technology::FutureStt,
        }
    }

    /// Future MTJ stack with a spin-Hall write channel.
    pub fn future_she() -> Self {
        DeviceParams {
            r_she_channel: Some(DEFAULT_SHE_CHANNEL_OHMS),
            technology: Technology::FutureShe,
            ..Self::future_stt()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        Ok(match name.parse::<Technology>()? {
            Technology::ModernStt => Self::modern_stt(),
            Technology::FutureStt => Self::future_stt(),
            Technology::FutureShe => Self::future_she(),
        })
    }

    pub fn with_transistor(mut self, ohms: f64) -> Self {
        self.r_transistor = ohms;
        self
    }

    pub fn variant(&self) -> CellVariant {
        self.technology.variant()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::DeviceParams(m));
        if !(self.r_p > 0.0) || !(self.r_ap > 0.0) {
            return bad(format!(
                "resistances must be positive (r_p={}, r_ap={})",
                self.r_p, self.r_ap
            ));
        }
        if !(self.t_switch > 0.0) {
            return bad(format!("t_switch must be positive, got {}", self.t_switch));
        }
        if !(self.i_switch > 0.0) {
            return bad(format!("i_switch must be positive, got {}", self.i_switch));
        }
        if !(self.r_transistor >= 0.0) {
            return bad(format!("r_transistor must be >= 0, got {}", self.r_transistor));
        }
        if self.variant() == CellVariant::She {
            match self.r_she_channel {
                Some(r) if r > 0.0 => {}
                _ => return bad("SHE technology needs a positive r_she_channel".into()),
            }
        }
        Ok(())
    }

    fn she_channel(&self) -> f64 {
        self.r_she_channel.unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    Not,
    Copy,
    And,
    Nand,
    Or,
    Nor,
}

impl GateKind {
    pub const ALL: [GateKind; 6] = [
        GateKind::Not,
        GateKind::Copy,
        GateKind::And,
        GateKind::Nand,
        GateKind::Or,
        GateKind::Nor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Not => "NOT",
            GateKind::Copy => "COPY",
            GateKind::And => "AND",
            GateKind::Nand => "NAND",
            GateKind::Or => "OR",
            GateKind::Nor => "NOR",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            GateKind::Not | GateKind::Copy => 1,
            _ => 2,
        }
    }

    pub fn spec(self) -> GateSpec {
        use SwitchDirection::*;
        let direction = match self {
            GateKind::Nand | GateKind::Nor | GateKind::Not => SetOnly,
            GateKind::And | GateKind::Or | GateKind::Copy => ResetOnly,
        };
        GateSpec {
            kind: self,
            arity: self.arity(),
            preset: !direction.target(),
            direction,
        }
    }

    /// Boolean function the gate computes from a correct preset.
    pub fn eval(self, inputs: &[bool]) -> bool {
        match self {
            GateKind::Not => !inputs[0],
            GateKind::Copy => inputs[0],
            GateKind::And => inputs.iter().all(|&b| b),
            GateKind::Nand => !inputs.iter().all(|&b| b),
            GateKind::Or => inputs.iter().any(|&b| b),
            GateKind::Nor => !inputs.iter().any(|&b| b),
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GateKind::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownGate(s.to_string()))
    }
}

/// Which transition the drive current can cause on the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SwitchDirection {
    /// 0 -> 1 only.
    SetOnly,
    /// 1 -> 0 only.
    ResetOnly,
}

impl SwitchDirection {
    pub fn target(self) -> bool {
        matches!(self, SwitchDirection::SetOnly)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GateSpec {
    pub kind: GateKind,
    pub arity: usize,
    /// Value the STT output must hold before the pulse.
    pub preset: bool,
    pub direction: SwitchDirection,
}

impl GateSpec {
    /// Whether the drive current exceeds the switching threshold.
    ///
    /// Current is highest when inputs sit in the low-resistance state, so every
    /// gate switches on some pattern of zeros: AND/NAND/NOT/COPY on any zero
    /// input, OR/NOR only when all inputs are zero.
    pub fn switches(&self, inputs: &[bool]) -> bool {
        match self.kind {
            GateKind::Or | GateKind::Nor => !inputs.iter().any(|&b| b),
            _ => !inputs.iter().all(|&b| b),
        }
    }
}

pub fn gate_semantics(name: &str) -> Result<GateSpec> {
    Ok(name.parse::<GateKind>()?.spec())
}

/// How a pulse cut short by a power failure resolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseCompletion {
    /// Switches only with the full pulse delivered.
    #[default]
    Deterministic,
    /// Treats half a pulse or more as switched; explores the "switched before
    /// the cut" branch.
    EarlySwitch,
}

impl PulseCompletion {
    pub fn completes(self, fraction: f64) -> bool {
        match self {
            PulseCompletion::Deterministic => fraction >= 1.0,
            PulseCompletion::EarlySwitch => fraction >= 0.5,
        }
    }
}

fn check_arity(kind: GateKind, got: usize) -> Result<()> {
    if got != kind.arity() {
        return Err(Error::Arity {
            gate: kind.name(),
            expected: kind.arity(),
            got,
        });
    }
    Ok(())
}

/// Applies one STT threshold pulse with deterministic completion.
pub fn apply_gate_stt(
    inputs: &[MtjState],
    output: MtjState,
    kind: GateKind,
    pulse_fraction: f64,
) -> Result<MtjState> {
    apply_gate_stt_with(
        inputs,
        output,
        kind,
        pulse_fraction,
        PulseCompletion::Deterministic,
    )
}

pub fn apply_gate_stt_with(
    inputs: &[MtjState],
    output: MtjState,
    kind: GateKind,
    pulse_fraction: f64,
    completion: PulseCompletion,
) -> Result<MtjState> {
    check_arity(kind, inputs.len())?;
    let spec = kind.spec();
    let bits: Vec<bool> = inputs.iter().map(|s| s.bit()).collect();
    if spec.switches(&bits) && completion.completes(pulse_fraction) {
        Ok(MtjState::from_bit(spec.direction.target()))
    } else {
        Ok(output)
    }
}

/// SHE gates assign the Boolean result; the prior output state is irrelevant.
pub fn apply_gate_she(inputs: &[MtjState], _output: MtjState, kind: GateKind) -> Result<MtjState> {
    check_arity(kind, inputs.len())?;
    let bits: Vec<bool> = inputs.iter().map(|s| s.bit()).collect();
    Ok(MtjState::from_bit(kind.eval(&bits)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageWindow {
    pub v_min: f64,
    pub v_max: f64,
    pub feasible: bool,
}

impl VoltageWindow {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.v_min + self.v_max)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.v_min && v < self.v_max
    }
}

fn parallel(rs: &[f64]) -> f64 {
    1.0 / rs.iter().map(|r| 1.0 / r).sum::<f64>()
}

/// Series resistance of the gate path for a given input pattern, rated with
/// the output at its preset (STT) or through the write channel (SHE).
pub fn path_resistance(kind: GateKind, inputs: &[bool], params: &DeviceParams) -> f64 {
    let she = params.variant() == CellVariant::She;
    let branches: Vec<f64> = inputs
        .iter()
        .map(|&b| {
            let r = MtjState::from_bit(b).resistance(params);
            if she {
                r + params.she_channel()
            } else {
                r
            }
        })
        .collect();
    let out = if she {
        params.she_channel()
    } else {
        MtjState::from_bit(kind.spec().preset).resistance(params)
    };
    parallel(&branches) + out + (inputs.len() + 1) as f64 * params.r_transistor
}

fn input_patterns(arity: usize) -> impl Iterator<Item = Vec<bool>> {
    (0..1u32 << arity).map(move |m| (0..arity).map(|i| m >> i & 1 == 1).collect())
}

/// Range of drive voltages that switches the output on exactly the
/// should-switch input patterns.
pub fn solve_drive_voltage(kind: GateKind, params: &DeviceParams) -> Result<VoltageWindow> {
    params.validate()?;
    let spec = kind.spec();
    let mut worst_switch = 0.0f64;
    let mut best_hold = f64::INFINITY;
    for inputs in input_patterns(spec.arity) {
        let r = path_resistance(kind, &inputs, params);
        if spec.switches(&inputs) {
            worst_switch = worst_switch.max(r);
        } else {
            best_hold = best_hold.min(r);
        }
    }
    let v_min = params.i_switch * worst_switch;
    let v_max = params.i_switch * best_hold;
    Ok(VoltageWindow {
        v_min,
        v_max,
        feasible: v_min < v_max,
    })
}

/// Peripheral and drive settings for the cost model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostConfig {
    /// Logic drive voltage; `None` uses each gate's window midpoint.
    pub v_drive: Option<f64>,
    /// Fraction of total energy spent in peripheral circuitry, in [0, 1).
    pub peripheral_share: f64,
    /// Address-decode latency per address carried by an instruction.
    pub t_setup: f64,
    /// Energy per non-volatile register bit; `None` uses the cell write energy.
    pub backup_bit_energy: Option<f64>,
    /// Energy to latch one column; `None` uses the backup bit energy.
    pub latch_energy: Option<f64>,
    /// Read current as a fraction of the switching current.
    pub read_current_fraction: f64,
    /// Instructions fetched per instruction-tile row read.
    pub fetch_amortization: u32,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            v_drive: None,
            peripheral_share: 0.5,
            t_setup: 0.5e-9,
            backup_bit_energy: None,
            latch_energy: None,
            read_current_fraction: 0.5,
            fetch_amortization: 16,
        }
    }
}

impl CostConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.peripheral_share) {
            return Err(Error::DeviceParams(format!(
                "peripheral_share must be in [0, 1), got {}",
                self.peripheral_share
            )));
        }
        if !(self.t_setup >= 0.0) {
            return Err(Error::DeviceParams("t_setup must be >= 0".into()));
        }
        if !(self.read_current_fraction > 0.0 && self.read_current_fraction < 1.0) {
            return Err(Error::DeviceParams(
                "read_current_fraction must be in (0, 1)".into(),
            ));
        }
        if self.fetch_amortization == 0 {
            return Err(Error::DeviceParams("fetch_amortization must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpClass {
    Logic(GateKind),
    WriteBit,
    ReadRow,
    WriteRow,
    BackupWrite,
    Fetch,
    /// Latching `n` column addresses.
    Activate(u16),
}

/// Latency of one operation and its energy per cell touched.
///
/// Per-cell units: `Logic`, `WriteBit` and `WriteRow` are per active column,
/// `ReadRow` per sensed bit, `BackupWrite` per register bit, `Activate` per
/// latched column. `Fetch` is per fetched instruction word.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OpCost {
    pub latency: f64,
    pub energy: f64,
    /// Extra energy per output cell that actually changes state (SHE logic).
    pub energy_per_flip: f64,
}

pub const ROW_BITS: usize = 1024;

pub fn op_cost(op: OpClass, params: &DeviceParams, cfg: &CostConfig) -> Result<OpCost> {
    params.validate()?;
    cfg.validate()?;
    let she = params.variant() == CellVariant::She;
    let scale = 1.0 / (1.0 - cfg.peripheral_share);
    let t = params.t_switch;
    let i = params.i_switch;
    let write_path = if she {
        params.she_channel() + params.r_transistor
    } else {
        params.r_ap + params.r_transistor
    };
    let write_energy = i * i * write_path * t;
    let read_path = params.r_p + params.she_channel() + params.r_transistor;
    let i_read = i * cfg.read_current_fraction;
    let read_energy = i_read * i_read * read_path * t;
    let backup = cfg.backup_bit_energy.unwrap_or(write_energy);

    let (latency, core, per_flip) = match op {
        OpClass::Logic(kind) => {
            let window = solve_drive_voltage(kind, params)?;
            let v = cfg.v_drive.unwrap_or_else(|| window.midpoint());
            if !window.feasible || !window.contains(v) {
                return Err(Error::InfeasibleWindow {
                    gate: kind.name(),
                    v_min: window.v_min,
                    v_max: window.v_max,
                });
            }
            let r_worst = window.v_min / i;
            let flip = if she { i * i * params.she_channel() * t } else { 0.0 };
            (
                t + cfg.t_setup * (kind.arity() + 1) as f64,
                v * v * t / r_worst,
                flip,
            )
        }
        OpClass::WriteBit | OpClass::WriteRow => (t + cfg.t_setup, write_energy, 0.0),
        OpClass::ReadRow => (t + cfg.t_setup, read_energy, 0.0),
        OpClass::BackupWrite => (t + cfg.t_setup, backup, 0.0),
        OpClass::Fetch => (
            t + cfg.t_setup,
            read_energy * ROW_BITS as f64 / cfg.fetch_amortization as f64,
            0.0,
        ),
        OpClass::Activate(n) => (
            cfg.t_setup * n.max(1) as f64,
            cfg.latch_energy.unwrap_or(backup),
            0.0,
        ),
    };
    Ok(OpCost {
        latency,
        energy: core * scale,
        energy_per_flip: per_flip * scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(s: MtjState) -> bool {
        s.bit()
    }

    #[test]
    fn gate_table_matches_threshold_description() {
        let nand = gate_semantics("nand").unwrap();
        assert_eq!(nand.arity, 2);
        assert!(!nand.preset);
        assert_eq!(nand.direction, SwitchDirection::SetOnly);
        assert!(nand.switches(&[false, true]));
        assert!(!nand.switches(&[true, true]));

        let and = gate_semantics("AND").unwrap();
        assert!(and.preset);
        assert_eq!(and.direction, SwitchDirection::ResetOnly);
        assert!(and.switches(&[false, true]));
        assert!(!and.switches(&[true, true]));

        let copy = gate_semantics("COPY").unwrap();
        assert_eq!(copy.arity, 1);
        for x in [false, true] {
            let out = apply_gate_stt(
                &[MtjState::from_bit(x)],
                MtjState::from_bit(copy.preset),
                GateKind::Copy,
                1.0,
            )
            .unwrap();
            assert_eq!(out.bit(), x);
        }
        assert!(matches!(gate_semantics("XOR"), Err(Error::UnknownGate(_))));
    }

    #[test]
    fn preset_and_direction_agree_for_every_gate() {
        for g in GateKind::ALL {
            let s = g.spec();
            assert_eq!(s.preset, !s.direction.target(), "{g}");
            assert!(s.arity <= 2);
        }
    }

    #[test]
    fn stt_examples() {
        use MtjState::*;
        assert_eq!(apply_gate_stt(&[AP, AP], P, GateKind::Nand, 1.0).unwrap(), P);
        assert_eq!(apply_gate_stt(&[P, AP], P, GateKind::Nand, 1.0).unwrap(), AP);
        let half = apply_gate_stt(&[P, AP], AP, GateKind::And, 0.5).unwrap();
        assert_eq!(half, AP);
        let again = apply_gate_stt(&[P, AP], half, GateKind::And, 1.0).unwrap();
        assert_eq!(again, apply_gate_stt(&[P, AP], AP, GateKind::And, 1.0).unwrap());
        assert_eq!(again, P);
        assert!(matches!(
            apply_gate_stt(&[P], P, GateKind::Nand, 1.0),
            Err(Error::Arity { .. })
        ));
    }

    #[test]
    fn she_examples() {
        use MtjState::*;
        assert_eq!(apply_gate_she(&[AP, AP], AP, GateKind::Nand).unwrap(), P);
        assert_eq!(apply_gate_she(&[AP, AP], P, GateKind::Nand).unwrap(), P);
        assert_eq!(apply_gate_she(&[P, P], P, GateKind::Nor).unwrap(), AP);
        assert!(apply_gate_she(&[P, P], P, GateKind::Not).is_err());
    }

    #[test]
    fn stt_never_switches_against_direction() {
        for g in GateKind::ALL {
            let spec = g.spec();
            for inputs in input_patterns(g.arity()) {
                let ins: Vec<MtjState> = inputs.iter().map(|&x| MtjState::from_bit(x)).collect();
                let start = MtjState::from_bit(spec.direction.target());
                for f in [0.0, 0.3, 1.0] {
                    let out = apply_gate_stt(&ins, start, g, f).unwrap();
                    assert_eq!(b(out), spec.direction.target());
                }
            }
        }
    }

    #[test]
    fn nand_windows_match_hand_series_parallel() {
        // Hand values: (P||AP)+P worst switch, (AP||AP)+P best hold.
        let fut = DeviceParams::future_stt().with_transistor(0.0);
        let w = solve_drive_voltage(GateKind::Nand, &fut).unwrap();
        let sw = 7.34e3 * 76.39e3 / (7.34e3 + 76.39e3) + 7.34e3;
        let hold = 76.39e3 / 2.0 + 7.34e3;
        assert!((w.v_min - 3e-6 * sw).abs() < 1e-12);
        assert!((w.v_max - 3e-6 * hold).abs() < 1e-12);
        assert!((w.v_min - 42.1e-3).abs() / 42.1e-3 < 0.01);
        assert!((w.v_max - 136.6e-3).abs() / 136.6e-3 < 0.01);
        assert!(w.feasible);

        let modern = DeviceParams::modern_stt().with_transistor(0.0);
        let w = solve_drive_voltage(GateKind::Nand, &modern).unwrap();
        assert!((w.v_min - 214.2e-3).abs() / 214.2e-3 < 0.01);
        assert!((w.v_max - 272.8e-3).abs() / 272.8e-3 < 0.01);
    }

    #[test]
    fn equal_resistances_are_infeasible() {
        let mut p = DeviceParams::future_stt();
        p.r_ap = p.r_p;
        for g in GateKind::ALL {
            assert!(!solve_drive_voltage(g, &p).unwrap().feasible, "{g}");
        }
        p.r_p = 0.0;
        assert!(solve_drive_voltage(GateKind::Nand, &p).is_err());
    }

    #[test]
    fn every_preset_gate_is_feasible() {
        for p in [
            DeviceParams::modern_stt(),
            DeviceParams::future_stt(),
            DeviceParams::future_she(),
        ] {
            for g in GateKind::ALL {
                assert!(solve_drive_voltage(g, &p).unwrap().feasible, "{g} {:?}", p.technology);
            }
        }
    }

    #[test]
    fn logic_cost_examples() {
        let p = DeviceParams::future_stt().with_transistor(0.0);
        let w = solve_drive_voltage(GateKind::Nand, &p).unwrap();
        let cfg = CostConfig {
            v_drive: Some(w.v_min),
            peripheral_share: 0.0,
            t_setup: 0.0,
            ..CostConfig::default()
        };
        let c = op_cost(OpClass::Logic(GateKind::Nand), &p, &cfg).unwrap();
        assert!((c.energy - 0.126e-15).abs() / 0.126e-15 < 0.01, "{}", c.energy);
        assert_eq!(c.latency, 1e-9);

        let half = CostConfig {
            peripheral_share: 0.5,
            ..cfg
        };
        let c2 = op_cost(OpClass::Logic(GateKind::Nand), &p, &half).unwrap();
        assert!((c2.energy - 2.0 * c.energy).abs() < 1e-30);

        let m = DeviceParams::modern_stt();
        let c = op_cost(OpClass::Logic(GateKind::Nand), &m, &CostConfig::default()).unwrap();
        assert!((c.latency - (3e-9 + 3.0 * 0.5e-9)).abs() < 1e-18);

        let outside = CostConfig {
            v_drive: Some(1.0),
            ..cfg
        };
        assert!(matches!(
            op_cost(OpClass::Logic(GateKind::Nand), &p, &outside),
            Err(Error::InfeasibleWindow { .. })
        ));
    }
}
