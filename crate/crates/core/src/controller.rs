//! Memory controller: fetch, broadcast and the crash-consistent commit of
//! the program counter.
//!
//! Each instruction occupies one issue slot. The slot idles first (the
//! throttling wait) and then runs its micro-steps:
//!
//! ```text
//! Idle -> Fetch -> Broadcast -> StoreAct -> WritePc -> FlipParity
//! ```
//!
//! `StoreAct` only exists for activation instructions. The new PC goes into
//! whichever of PC-A / PC-B the parity bit marks invalid, and the parity flip
//! is the single-bit commit point. Tile latches and the row buffer are
//! volatile; everything in [`ArchState`] and every MTJ cell survives an
//! outage.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{CellAddress, RowBuffer, Tile, TILE_COLS};
use crate::device::{
    op_cost, CellVariant, CostConfig, DeviceParams, GateKind, OpClass, OpCost, PulseCompletion,
    ROW_BITS,
};
use crate::error::{Error, Result};
use crate::isa::{decode, encode, Instruction, Word64, HALT_WORD};
use crate::metrics::{Category, EnergyLedger};
use crate::power::{paced_period, CutSpec, PowerTrace, ThrottleMode, ThrottlePolicy};

/// Micro-steps of one issue slot, in time order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Fetch,
    Broadcast,
    StoreAct,
    WritePc,
    FlipParity,
}

impl Phase {
    pub const ALL: [Phase; 6] = [
        Phase::Idle,
        Phase::Fetch,
        Phase::Broadcast,
        Phase::StoreAct,
        Phase::WritePc,
        Phase::FlipParity,
    ];

    /// Index into the busy-phase arrays; `None` for `Idle`.
    fn busy_index(self) -> Option<usize> {
        match self {
            Phase::Idle => None,
            Phase::Fetch => Some(0),
            Phase::Broadcast => Some(1),
            Phase::StoreAct => Some(2),
            Phase::WritePc => Some(3),
            Phase::FlipParity => Some(4),
        }
    }

    fn from_busy_index(i: usize) -> Phase {
        Phase::ALL[i + 1]
    }
}

impl std::str::FromStr for Phase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Phase::ALL
            .into_iter()
            .find(|p| format!("{p:?}").eq_ignore_ascii_case(s.replace(['_', '-'], "").as_str()))
            .ok_or_else(|| Error::Config(format!("unknown phase `{s}`")))
    }
}

pub const PC_BITS: u32 = 32;
pub const ACT_BITS: u32 = 64;
pub const SCORE_BITS: u32 = 64;

/// Non-volatile architectural registers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchState {
    pub pc_a: u32,
    pub pc_b: u32,
    /// `false` selects PC-A.
    pub parity: bool,
    /// Most recent committed activation, or [`HALT_WORD`] for none.
    pub stored_act: Word64,
}

impl Default for ArchState {
    fn default() -> Self {
        ArchState {
            pc_a: 0,
            pc_b: 0,
            parity: false,
            stored_act: HALT_WORD,
        }
    }
}

impl ArchState {
    pub fn valid_pc(&self) -> u32 {
        if self.parity {
            self.pc_b
        } else {
            self.pc_a
        }
    }

    fn invalid_pc_mut(&mut self) -> &mut u32 {
        if self.parity {
            &mut self.pc_a
        } else {
            &mut self.pc_b
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MachineConfig {
    pub params: DeviceParams,
    pub cost: CostConfig,
    pub throttle: ThrottlePolicy,
    pub completion: PulseCompletion,
    /// Reject STT logic whose output was not preset (first execution only).
    pub strict_presets: bool,
    /// Simulated-time guard, seconds.
    pub max_time: f64,
}

impl Default for MachineConfig {
    fn default() -> Self {
        MachineConfig {
            params: DeviceParams::future_stt(),
            cost: CostConfig::default(),
            throttle: ThrottlePolicy::default(),
            completion: PulseCompletion::Deterministic,
            strict_presets: false,
            max_time: 60.0,
        }
    }
}

impl MachineConfig {
    pub fn with_params(params: DeviceParams) -> Self {
        MachineConfig {
            params,
            ..Self::default()
        }
    }
}

/// Per-operation costs, evaluated once per configuration.
#[derive(Debug, Clone)]
pub struct CostTable {
    pub fetch: OpCost,
    pub logic: [OpCost; 6],
    pub write_bit: OpCost,
    pub write_row: OpCost,
    /// Per sensed bit.
    pub read_row: OpCost,
    /// Per register bit.
    pub backup: OpCost,
    /// Indexed by the number of latched addresses.
    pub activate: [OpCost; 6],
}

fn gate_index(k: GateKind) -> usize {
    GateKind::ALL.iter().position(|&g| g == k).unwrap()
}

impl CostTable {
    pub fn new(params: &DeviceParams, cfg: &CostConfig) -> Result<Self> {
        let c = |op| op_cost(op, params, cfg);
        let mut logic = [OpCost::default(); 6];
        for (i, g) in GateKind::ALL.into_iter().enumerate() {
            logic[i] = c(OpClass::Logic(g))?;
        }
        let mut activate = [OpCost::default(); 6];
        for (n, slot) in activate.iter_mut().enumerate() {
            *slot = c(OpClass::Activate(n as u16))?;
        }
        Ok(CostTable {
            fetch: c(OpClass::Fetch)?,
            logic,
            write_bit: c(OpClass::WriteBit)?,
            write_row: c(OpClass::WriteRow)?,
            read_row: c(OpClass::ReadRow)?,
            backup: c(OpClass::BackupWrite)?,
            activate,
        })
    }

    fn op(&self, instr: &Instruction) -> OpCost {
        match instr {
            Instruction::Logic { kind, .. } => self.logic[gate_index(*kind)],
            Instruction::WriteBit { .. } => self.write_bit,
            Instruction::WriteRow { .. } => self.write_row,
            Instruction::ReadRow { .. } => self.read_row,
            Instruction::ActivateColumns { cols, .. } => self.activate[cols.as_slice().len()],
            Instruction::ActivateRange { .. } => self.activate[2],
            Instruction::Halt => OpCost::default(),
        }
    }

    /// Latency and energy of the array operation with `active` latched
    /// columns and `flips` changed output cells.
    fn broadcast(&self, instr: &Instruction, active: u32, flips: u32) -> (f64, f64) {
        let c = self.op(instr);
        let e = match instr {
            Instruction::ReadRow { .. } => c.energy * ROW_BITS as f64,
            Instruction::ActivateColumns { cols, .. } => c.energy * cols.as_slice().len() as f64,
            Instruction::ActivateRange { .. } => c.energy * 2.0,
            Instruction::Halt => 0.0,
            _ => c.energy * active as f64 + c.energy_per_flip * flips as f64,
        };
        (c.latency, e)
    }

    /// Longest fetch-to-commit latency over the whole ISA.
    fn base_latency(&self) -> f64 {
        let op = self
            .logic
            .iter()
            .chain([&self.write_bit, &self.write_row, &self.read_row])
            .chain(self.activate.iter())
            .map(|c| c.latency)
            .fold(0.0, f64::max);
        self.fetch.latency + op + 3.0 * self.backup.latency
    }
}

/// Timing and worst-case energy of one issue slot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Shape {
    pub idle: f64,
    /// Latencies of Fetch, Broadcast, StoreAct, WritePc, FlipParity.
    pub lat: [f64; 5],
    pub energy: [f64; 5],
    pub period: f64,
}

impl Shape {
    fn from_phases(lat: [f64; 5], energy: [f64; 5], period: f64) -> Self {
        let busy: f64 = lat.iter().sum();
        Shape {
            idle: (period - busy).max(0.0),
            lat,
            energy,
            period: period.max(busy),
        }
    }

    /// Time from slot start to `fraction` of `phase`.
    pub fn offset(&self, phase: Phase, fraction: f64) -> f64 {
        match phase.busy_index() {
            None => fraction * self.idle,
            Some(i) => self.idle + self.lat[..i].iter().sum::<f64>() + fraction * self.lat[i],
        }
    }

    /// Phase and fraction at `tau` seconds into the slot (`tau < period`).
    pub fn locate(&self, tau: f64) -> (Phase, f64) {
        if tau < self.idle {
            return (Phase::Idle, tau / self.idle);
        }
        let mut start = self.idle;
        for i in 0..5 {
            let l = self.lat[i];
            if l > 0.0 && tau < start + l {
                return (Phase::from_busy_index(i), (tau - start) / l);
            }
            start += l;
        }
        (Phase::FlipParity, 1.0)
    }
}

/// Cross-column sum of per-lane terms, performed by the controller after
/// `Halt`.
///
/// Step `i < width` reads term row `i` into the buffer and folds it into
/// per-class partial sums held in duplicated non-volatile registers,
/// committed like the PC. The last step writes each class score, minus its
/// bias, bit-serially into column `class` of `score_tile`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionPlan {
    pub term_tile: u16,
    /// LSB first; the last row is the two's-complement sign bit.
    pub term_rows: Vec<u16>,
    /// (column, class) of every lane.
    pub lanes: Vec<(u16, usize)>,
    pub rho: Vec<i64>,
    pub score_tile: u16,
}

impl ReductionPlan {
    pub fn n_classes(&self) -> usize {
        self.rho.len()
    }

    pub fn steps(&self) -> u32 {
        self.term_rows.len() as u32 + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.term_rows.is_empty() || self.term_rows.len() > 64 {
            return Err(Error::Layout("term width must be 1..=64 rows".into()));
        }
        if self.rho.is_empty() || self.rho.len() > TILE_COLS {
            return Err(Error::Layout("class count out of range".into()));
        }
        if let Some(&(c, k)) = self
            .lanes
            .iter()
            .find(|&&(c, k)| c as usize >= TILE_COLS || k >= self.rho.len())
        {
            return Err(Error::Layout(format!("bad lane (column {c}, class {k})")));
        }
        if self.score_tile == self.term_tile {
            return Err(Error::Layout("score tile must differ from term tile".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ReduceState {
    plan: Arc<ReductionPlan>,
    shapes: Arc<Vec<Shape>>,
    /// Committed step count.
    progress: u32,
    partial: Vec<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Unit {
    Instr(u32),
    Reduce(u32),
}

#[derive(Debug, Default)]
struct Exec {
    started: bool,
    broadcast_started: bool,
    committed: bool,
    energy: [f64; 5],
}

/// Snapshot of everything non-volatile, for golden-state tests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub arch: ArchState,
    /// (tile, row-major cell bytes).
    pub tiles: Vec<(u16, Vec<u8>)>,
}

#[derive(Debug, Clone)]
pub struct Machine {
    cfg: Arc<MachineConfig>,
    costs: Arc<CostTable>,
    program: Arc<[Word64]>,
    shapes: Arc<Vec<Shape>>,
    pub arch: ArchState,
    tiles: BTreeMap<u16, Tile>,
    buffer: RowBuffer,
    halted: bool,
    reduce: Option<ReduceState>,
    /// Unit whose broadcast started but has not committed. Observer
    /// bookkeeping used to attribute Dead energy.
    attempted: Option<Unit>,
}

impl Machine {
    pub fn new(cfg: MachineConfig, words: &[Word64]) -> Result<Self> {
        cfg.params.validate()?;
        cfg.cost.validate()?;
        cfg.throttle.validate()?;
        let costs = CostTable::new(&cfg.params, &cfg.cost)?;
        let shapes = schedule(words, &costs, &cfg.throttle);
        Ok(Machine {
            cfg: Arc::new(cfg),
            costs: Arc::new(costs),
            program: words.into(),
            shapes: Arc::new(shapes),
            arch: ArchState::default(),
            tiles: BTreeMap::new(),
            buffer: RowBuffer::default(),
            halted: false,
            reduce: None,
            attempted: None,
        })
    }

    pub fn from_program(cfg: MachineConfig, program: &[Instruction]) -> Result<Self> {
        let words: Vec<Word64> = program.iter().map(encode).collect();
        Self::new(cfg, &words)
    }

    pub fn config(&self) -> &MachineConfig {
        &self.cfg
    }

    pub fn costs(&self) -> &CostTable {
        &self.costs
    }

    pub fn program_len(&self) -> u32 {
        self.program.len() as u32
    }

    pub fn shape(&self, pc: u32) -> Option<&Shape> {
        self.shapes.get(pc as usize)
    }

    pub fn variant(&self) -> CellVariant {
        self.cfg.params.variant()
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    /// Attaches the post-`Halt` reduction.
    pub fn with_reduction(mut self, plan: ReductionPlan) -> Result<Self> {
        plan.validate()?;
        let shapes = reduction_schedule(&plan, &self.costs, &self.cfg.throttle);
        self.reduce = Some(ReduceState {
            partial: vec![0; plan.n_classes()],
            plan: Arc::new(plan),
            shapes: Arc::new(shapes),
            progress: 0,
        });
        Ok(self)
    }

    pub fn tile(&self, t: u16) -> Option<&Tile> {
        self.tiles.get(&t)
    }

    /// The tile, created zeroed on first use.
    pub fn tile_mut(&mut self, t: u16) -> &mut Tile {
        let v = self.variant();
        self.tiles.entry(t).or_insert_with(|| Tile::new(v))
    }

    pub fn tile_ids(&self) -> impl Iterator<Item = u16> + '_ {
        self.tiles.keys().copied()
    }

    pub fn buffer(&self) -> &RowBuffer {
        &self.buffer
    }

    /// Scores written by the reduction, if it has finished.
    pub fn scores(&self) -> Option<Vec<i64>> {
        let r = self.reduce.as_ref()?;
        if r.progress < r.plan.steps() {
            return None;
        }
        let rows: Vec<u16> = (0..SCORE_BITS as u16).collect();
        let tile = self.tiles.get(&r.plan.score_tile)?;
        Some(
            (0..r.plan.n_classes())
                .map(|c| tile.load_uint(c as u16, &rows) as i64)
                .collect(),
        )
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            arch: self.arch,
            tiles: self.tiles.iter().map(|(&k, t)| (k, t.to_bytes())).collect(),
        }
    }

    /// First cell whose contents differ; absent tiles count as all zero.
    pub fn first_divergence(&self, other: &Machine) -> Option<CellAddress> {
        let zero = Tile::new(self.variant());
        let keys: std::collections::BTreeSet<u16> =
            self.tiles.keys().chain(other.tiles.keys()).copied().collect();
        for k in keys {
            let a = self.tiles.get(&k).unwrap_or(&zero);
            let b = other.tiles.get(&k).unwrap_or(&zero);
            if let Some((row, col)) = a.first_difference(b) {
                return Some(CellAddress { tile: k, row, col });
            }
        }
        None
    }

    pub fn data_equal(&self, other: &Machine) -> bool {
        self.first_divergence(other).is_none()
    }

    /// Drops volatile state: tile latches, the row buffer and the halt latch.
    pub fn power_loss(&mut self) {
        for t in self.tiles.values_mut() {
            t.clear_latch();
        }
        self.buffer = RowBuffer::default();
        self.halted = false;
    }

    fn done(&self) -> bool {
        self.halted
            && self
                .reduce
                .as_ref()
                .is_none_or(|r| r.progress >= r.plan.steps())
    }

    fn current_unit(&self) -> Result<Unit> {
        if self.halted {
            let r = self.reduce.as_ref().expect("not done");
            return Ok(Unit::Reduce(r.progress));
        }
        let pc = self.arch.valid_pc();
        if pc as usize >= self.program.len() {
            return Err(Error::PcOutOfBounds {
                pc,
                len: self.program.len() as u32,
            });
        }
        Ok(Unit::Instr(pc))
    }

    fn unit_shape(&self, u: Unit) -> Shape {
        match u {
            Unit::Instr(pc) => self.shapes[pc as usize],
            Unit::Reduce(s) => self.reduce.as_ref().unwrap().shapes[s as usize],
        }
    }

    /// Restore slot for the current stored activation.
    fn restore_shape(&self) -> Shape {
        let c = &self.costs;
        let read = (c.read_row.latency, c.read_row.energy * (1 + PC_BITS) as f64);
        let act = match decode(self.arch.stored_act) {
            Ok(i) if i.is_activation() => c.broadcast(&i, 0, 0),
            _ => (0.0, 0.0),
        };
        let lat = [read.0, act.0, 0.0, 0.0, 0.0];
        let energy = [read.1, act.1, 0.0, 0.0, 0.0];
        let period = paced_period(&[read, act], 0.0, &self.cfg.throttle);
        Shape::from_phases(lat, energy, period)
    }

    /// Re-issues the stored activation after power returns.
    fn apply_restore(&mut self) -> Result<()> {
        if self.arch.stored_act != HALT_WORD {
            let i = decode(self.arch.stored_act)?;
            self.apply(&i, 1.0)?;
        }
        Ok(())
    }

    /// Power-on sequence outside the timed loop: drop volatile state and
    /// restore the latch. Charged as Restore.
    pub fn restart(&mut self, ledger: &mut EnergyLedger) -> Result<()> {
        self.power_loss();
        let s = self.restore_shape();
        self.apply_restore()?;
        ledger.restarts += 1;
        ledger.charge(Category::Restore, s.energy.iter().sum(), s.period)
    }

    /// Executes one issue slot with full power and charges it.
    /// Returns `true` once the machine (and any reduction) has finished.
    pub fn step(&mut self, ledger: &mut EnergyLedger) -> Result<bool> {
        if self.done() {
            return Ok(true);
        }
        let u = self.current_unit()?;
        let s = self.unit_shape(u);
        let dead = self.attempted == Some(u);
        let ex = self.exec(u, None, dead)?;
        self.account(u, &ex, dead, ledger)?;
        ledger.advance(s.period)?;
        Ok(self.done())
    }

    fn account(&mut self, u: Unit, ex: &Exec, dead: bool, l: &mut EnergyLedger) -> Result<()> {
        if ex.started && dead {
            l.re_executed += 1;
        }
        if ex.broadcast_started {
            self.attempted = Some(u);
        }
        let work = if dead { Category::Dead } else { Category::Productive };
        l.charge(work, ex.energy[0] + ex.energy[1], 0.0)?;
        l.charge(Category::Backup, ex.energy[2] + ex.energy[3] + ex.energy[4], 0.0)?;
        if ex.committed {
            self.attempted = None;
            if matches!(u, Unit::Instr(_)) {
                l.instructions += 1;
            }
        }
        Ok(())
    }

    fn active_count(&self, tile: u16) -> u32 {
        self.tiles.get(&tile).map_or(0, |t| t.active_columns().count())
    }

    /// Runs the array operation with a pulse cut to `fraction`; returns the
    /// energy spent.
    fn apply(&mut self, instr: &Instruction, fraction: f64) -> Result<f64> {
        let completion = self.cfg.completion;
        let tile_id = match instr.tile() {
            Some(t) => t,
            None => return Ok(0.0),
        };
        let active = self.active_count(tile_id);
        let mut flips = 0;
        match *instr {
            Instruction::Logic { kind, rows, .. } => {
                flips = self.tile_mut(tile_id).logic_op(kind, rows, fraction, completion)?;
            }
            Instruction::WriteBit { row, value, .. } => {
                self.tile_mut(tile_id).write_bit(row, value, fraction, completion)?;
            }
            Instruction::ReadRow { row, .. } => {
                if completion.completes(fraction) {
                    self.buffer = self.tile_mut(tile_id).read_row(row)?;
                }
            }
            Instruction::WriteRow { row, .. } => {
                let buf = self.buffer;
                self.tile_mut(tile_id).write_row(row, &buf, fraction, completion)?;
            }
            Instruction::ActivateColumns { cols, .. } => {
                if completion.completes(fraction) {
                    self.tile_mut(tile_id).activate_columns(cols.as_slice())?;
                }
            }
            Instruction::ActivateRange { start, end, .. } => {
                if completion.completes(fraction) {
                    self.tile_mut(tile_id).activate_range(start, end)?;
                }
            }
            Instruction::Halt => {}
        }
        let (_, full) = self.costs.broadcast(instr, active, 0);
        let (_, per_flip) = self.costs.broadcast(instr, 0, 1);
        let flip_e = if matches!(instr, Instruction::Logic { .. }) {
            per_flip * flips as f64
        } else {
            0.0
        };
        Ok(fraction.min(1.0) * full + flip_e)
    }

    fn exec(&mut self, u: Unit, cut: Option<(Phase, f64)>, dead: bool) -> Result<Exec> {
        match u {
            Unit::Instr(pc) => self.exec_instr(pc, cut, dead),
            Unit::Reduce(s) => self.exec_reduce(s, cut),
        }
    }

    fn exec_instr(&mut self, pc: u32, cut: Option<(Phase, f64)>, dead: bool) -> Result<Exec> {
        let at = |p: Phase| match cut {
            Some((q, f)) if q == p => Some(f),
            _ => None,
        };
        let mut ex = Exec::default();
        if at(Phase::Idle).is_some() {
            return Ok(ex);
        }
        ex.started = true;
        let fetch_e = self.costs.fetch.energy;
        if let Some(f) = at(Phase::Fetch) {
            ex.energy[0] = f * fetch_e;
            return Ok(ex);
        }
        ex.energy[0] = fetch_e;
        let word = self.program[pc as usize];
        let instr = decode(word)?;
        if instr == Instruction::Halt {
            self.halted = true;
            return Ok(ex);
        }

        ex.broadcast_started = true;
        let f = at(Phase::Broadcast).unwrap_or(1.0);
        let strict = self.cfg.strict_presets && !dead;
        if let Some(t) = instr.tile() {
            self.tile_mut(t).strict_presets = strict;
        }
        ex.energy[1] = self.apply(&instr, f)?;
        if at(Phase::Broadcast).is_some() {
            return Ok(ex);
        }

        let bk = self.costs.backup.energy;
        let completion = self.cfg.completion;
        if instr.is_activation() {
            if let Some(f) = at(Phase::StoreAct) {
                if completion.completes(f) {
                    self.arch.stored_act = word;
                }
                ex.energy[2] = f * bk * ACT_BITS as f64;
                return Ok(ex);
            }
            self.arch.stored_act = word;
            ex.energy[2] = bk * ACT_BITS as f64;
        } else if at(Phase::StoreAct).is_some() {
            return Ok(ex);
        }

        let next = pc + 1;
        if let Some(f) = at(Phase::WritePc) {
            let k = ((f * PC_BITS as f64).floor() as u32).min(PC_BITS);
            let mask = if k >= 32 { u32::MAX } else { (1u32 << k) - 1 };
            let reg = self.arch.invalid_pc_mut();
            *reg = (*reg & !mask) | (next & mask);
            ex.energy[3] = f * bk * PC_BITS as f64;
            return Ok(ex);
        }
        *self.arch.invalid_pc_mut() = next;
        ex.energy[3] = bk * PC_BITS as f64;

        if let Some(f) = at(Phase::FlipParity) {
            ex.energy[4] = f * bk;
            if completion.completes(f) {
                self.arch.parity = !self.arch.parity;
                ex.committed = true;
            }
            return Ok(ex);
        }
        ex.energy[4] = bk;
        self.arch.parity = !self.arch.parity;
        ex.committed = true;
        Ok(ex)
    }

    fn exec_reduce(&mut self, step: u32, cut: Option<(Phase, f64)>) -> Result<Exec> {
        let at = |p: Phase| match cut {
            Some((q, f)) if q == p => Some(f),
            _ => None,
        };
        let mut ex = Exec::default();
        if at(Phase::Idle).is_some() {
            return Ok(ex);
        }
        ex.started = true;
        if at(Phase::Fetch).is_some() {
            return Ok(ex);
        }
        ex.broadcast_started = true;
        let state = self.reduce.as_ref().unwrap();
        let plan = state.plan.clone();
        let shape = state.shapes[step as usize];
        let width = plan.term_rows.len() as u32;
        let completion = self.cfg.completion;
        let f = at(Phase::Broadcast).unwrap_or(1.0);
        ex.energy[1] = f.min(1.0) * shape.energy[1];
        if completion.completes(f) {
            if step < width {
                self.buffer = self
                    .tile_mut(plan.term_tile)
                    .read_row(plan.term_rows[step as usize])?;
            } else {
                let partial = state.partial.clone();
                let rows: Vec<u16> = (0..SCORE_BITS as u16).collect();
                let tile = self.tile_mut(plan.score_tile);
                for (c, (p, rho)) in partial.iter().zip(&plan.rho).enumerate() {
                    tile.store_uint(c as u16, &rows, p.wrapping_sub(*rho) as u64);
                }
            }
        }
        if at(Phase::Broadcast).is_some() {
            return Ok(ex);
        }
        // StoreAct has zero length in reduction slots.
        if at(Phase::StoreAct).is_some() {
            return Ok(ex);
        }
        if let Some(f) = at(Phase::WritePc) {
            // Torn writes land in the invalid copy and are never observed.
            ex.energy[3] = f * shape.energy[3];
            return Ok(ex);
        }
        ex.energy[3] = shape.energy[3];
        if let Some(f) = at(Phase::FlipParity) {
            ex.energy[4] = f * shape.energy[4];
            if !completion.completes(f) {
                return Ok(ex);
            }
        } else {
            ex.energy[4] = shape.energy[4];
        }
        let buffer = self.buffer;
        let state = self.reduce.as_mut().unwrap();
        if step < width {
            let weight = if step == width - 1 {
                (1i64 << step).wrapping_neg()
            } else {
                1i64 << step
            };
            for &(col, class) in &plan.lanes {
                if buffer.get(col) {
                    state.partial[class] = state.partial[class].wrapping_add(weight);
                }
            }
        }
        state.progress = step + 1;
        ex.committed = true;
        Ok(ex)
    }

    /// Runs to completion under `trace`, with an optional injected outage.
    pub fn run(&mut self, trace: &PowerTrace, cut: Option<CutSpec>) -> Result<EnergyLedger> {
        trace.validate()?;
        let max_time = self.cfg.max_time;
        let mut l = EnergyLedger::new();
        let mut now = 0.0f64;
        let mut pending = cut;
        let mut need_restart = false;
        let mut stalls = 0u32;

        let wait = |now: f64, forced: bool| -> Result<f64> {
            let t = if forced {
                trace.next_rising_edge(now)
            } else {
                trace.next_on(now)
            };
            t.ok_or_else(|| Error::PowerTrace("power never returns before the program ends".into()))
        };

        if !trace.is_on(0.0) {
            now = wait(0.0, false)?;
            l.advance(now)?;
        }

        while !self.done() {
            if now > max_time {
                return Err(Error::TimeLimit(max_time));
            }
            if stalls > 1000 {
                return Err(Error::PowerTrace(
                    "on-windows too short to commit any instruction".into(),
                ));
            }
            if !trace.is_on(now) {
                self.power_loss();
                let t = wait(now, false)?;
                l.advance(t - now)?;
                now = t;
                need_restart = true;
            }
            let mut off = trace.next_off(now);
            let mut forced = false;
            if let Some(CutSpec::Time(tc)) = pending {
                if tc < now {
                    pending = None;
                } else if tc < off {
                    off = tc;
                    forced = true;
                }
            }

            if need_restart {
                let s = self.restore_shape();
                if now + s.period > off {
                    let tau = off - now;
                    let (ph, f) = s.locate(tau);
                    let spent = spent_energy(&s, ph, f);
                    l.charge(Category::Restore, spent, tau)?;
                    l.restarts += 1;
                    if forced {
                        pending = None;
                    }
                    self.power_loss();
                    let t = wait(off, forced)?;
                    l.advance(t - off)?;
                    now = t;
                    stalls += 1;
                    continue;
                }
                self.apply_restore()?;
                l.restarts += 1;
                l.charge(Category::Restore, s.energy.iter().sum(), s.period)?;
                now += s.period;
                need_restart = false;
                continue;
            }

            let u = self.current_unit()?;
            let s = self.unit_shape(u);
            let mut cut_at: Option<(Phase, f64, f64)> = None;
            if off < now + s.period {
                let (ph, f) = s.locate(off - now);
                cut_at = Some((ph, f, off));
            }
            if let (Some(CutSpec::At { pc, phase, fraction }), Unit::Instr(cur)) = (pending, u) {
                if pc == cur {
                    let t = now + s.offset(phase, fraction);
                    if cut_at.is_none_or(|c| t <= c.2) {
                        cut_at = Some((phase, fraction, t));
                        forced = true;
                    }
                }
            }

            let dead = self.attempted == Some(u);
            let ex = self.exec(u, cut_at.map(|c| (c.0, c.1)), dead)?;
            self.account(u, &ex, dead, &mut l)?;
            match cut_at {
                Some((_, _, t)) => {
                    if ex.committed {
                        stalls = 0;
                    } else {
                        stalls += 1;
                    }
                    if forced {
                        pending = None;
                    }
                    l.advance(t - now)?;
                    self.power_loss();
                    let back = wait(t, forced)?;
                    l.advance(back - t)?;
                    now = back;
                    need_restart = true;
                }
                None => {
                    stalls = 0;
                    l.advance(s.period)?;
                    now += s.period;
                }
            }
        }
        Ok(l)
    }
}

fn spent_energy(s: &Shape, phase: Phase, fraction: f64) -> f64 {
    match phase.busy_index() {
        None => 0.0,
        Some(i) => s.energy[..i].iter().sum::<f64>() + fraction * s.energy[i],
    }
}

/// Static slot shapes for every instruction word. Tracks the latched
/// column count per tile and assumes every output cell flips.
fn schedule(words: &[Word64], costs: &CostTable, policy: &ThrottlePolicy) -> Vec<Shape> {
    let base = costs.base_latency();
    let bk = costs.backup;
    let mut latched: BTreeMap<u16, u32> = BTreeMap::new();
    let mut shapes: Vec<Shape> = words
        .iter()
        .map(|&w| {
            let (lat, energy) = match decode(w) {
                Ok(Instruction::Halt) => ([costs.fetch.latency, 0.0, 0.0, 0.0, 0.0], [costs.fetch.energy, 0.0, 0.0, 0.0, 0.0]),
                Ok(i) => {
                    let t = i.tile().unwrap();
                    match i {
                        Instruction::ActivateColumns { cols, .. } => {
                            latched.insert(t, cols.as_slice().len() as u32);
                        }
                        Instruction::ActivateRange { start, end, .. } => {
                            latched.insert(t, (end - start + 1) as u32);
                        }
                        _ => {}
                    }
                    let n = latched.get(&t).copied().unwrap_or(0);
                    let (ol, oe) = costs.broadcast(&i, n, n);
                    let act = i.is_activation();
                    (
                        [
                            costs.fetch.latency,
                            ol,
                            if act { bk.latency } else { 0.0 },
                            bk.latency,
                            bk.latency,
                        ],
                        [
                            costs.fetch.energy,
                            oe,
                            if act { bk.energy * ACT_BITS as f64 } else { 0.0 },
                            bk.energy * PC_BITS as f64,
                            bk.energy,
                        ],
                    )
                }
                Err(_) => ([costs.fetch.latency, 0.0, 0.0, 0.0, 0.0], [costs.fetch.energy, 0.0, 0.0, 0.0, 0.0]),
            };
            let phases: Vec<(f64, f64)> = lat.iter().copied().zip(energy).collect();
            let p = paced_period(&phases, base, policy);
            Shape::from_phases(lat, energy, p)
        })
        .collect();
    if policy.mode == ThrottleMode::Static || policy.mode == ThrottleMode::Off {
        let p = shapes.iter().map(|s| s.period).fold(base, f64::max);
        for s in &mut shapes {
            *s = Shape::from_phases(s.lat, s.energy, p);
        }
    }
    shapes
}

fn reduction_schedule(plan: &ReductionPlan, costs: &CostTable, policy: &ThrottlePolicy) -> Vec<Shape> {
    let bk = costs.backup;
    let classes = plan.n_classes() as f64;
    let width = plan.term_rows.len();
    (0..=width)
        .map(|s| {
            let (ol, oe, reg_bits) = if s < width {
                (
                    costs.read_row.latency,
                    costs.read_row.energy * ROW_BITS as f64,
                    classes * SCORE_BITS as f64 + PC_BITS as f64,
                )
            } else {
                (
                    costs.write_row.latency * SCORE_BITS as f64,
                    costs.write_row.energy * classes * SCORE_BITS as f64,
                    PC_BITS as f64,
                )
            };
            let lat = [0.0, ol, 0.0, bk.latency, bk.latency];
            let energy = [0.0, oe, 0.0, bk.energy * reg_bits, bk.energy];
            let phases: Vec<(f64, f64)> = lat.iter().copied().zip(energy).collect();
            let busy: f64 = lat.iter().sum();
            Shape::from_phases(lat, energy, paced_period(&phases, busy, policy))
        })
        .collect()
}

/// Cut-point granularity for the crash sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Granularity {
    /// The start of every micro-step.
    Boundaries,
    /// Boundaries plus 1/4, 1/2 and 3/4 of every micro-step.
    Full,
}

impl std::str::FromStr for Granularity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "boundaries" | "boundaries-only" => Ok(Granularity::Boundaries),
            "full" => Ok(Granularity::Full),
            _ => Err(Error::Config(format!("unknown granularity `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutOutcome {
    pub cut: CutSpec,
    pub pass: bool,
    pub re_executed: u64,
    pub divergence: Option<CellAddress>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub golden_instructions: u64,
    pub outcomes: Vec<CutOutcome>,
}

impl SweepReport {
    pub fn passed(&self) -> usize {
        self.outcomes.iter().filter(|o| o.pass).count()
    }

    pub fn all_pass(&self) -> bool {
        self.passed() == self.outcomes.len()
    }

    pub fn first_failure(&self) -> Option<&CutOutcome> {
        self.outcomes.iter().find(|o| !o.pass)
    }
}

/// Every cut point of `machine`'s program at the given granularity.
pub fn cut_points(machine: &Machine, granularity: Granularity) -> Vec<CutSpec> {
    let fractions: &[f64] = match granularity {
        Granularity::Boundaries => &[0.0],
        Granularity::Full => &[0.0, 0.25, 0.5, 0.75],
    };
    let mut out = Vec::new();
    for (pc, &w) in machine.program.iter().enumerate() {
        let instr = decode(w).ok();
        for phase in Phase::ALL {
            let applies = match (phase, instr) {
                (Phase::Idle | Phase::Fetch, _) => true,
                (_, None | Some(Instruction::Halt)) => false,
                (Phase::StoreAct, Some(i)) => i.is_activation(),
                _ => true,
            };
            if applies {
                for &fraction in fractions {
                    out.push(CutSpec::At {
                        pc: pc as u32,
                        phase,
                        fraction,
                    });
                }
            }
        }
    }
    out
}

/// Runs `initial` once uninterrupted and once per cut, in parallel, and
/// compares final non-volatile data. Outcomes are in cut order.
pub fn crash_sweep(
    initial: &Machine,
    trace: &PowerTrace,
    cuts: &[CutSpec],
) -> Result<SweepReport> {
    let mut golden = initial.clone();
    let gl = golden.run(trace, None)?;
    let golden_scores = golden.scores();
    let outcomes = cuts
        .par_iter()
        .map(|&cut| {
            let mut m = initial.clone();
            match m.run(trace, Some(cut)) {
                Ok(l) => {
                    let divergence = m.first_divergence(&golden);
                    let pass = divergence.is_none()
                        && l.re_executed <= 1
                        && m.scores() == golden_scores;
                    CutOutcome {
                        cut,
                        pass,
                        re_executed: l.re_executed,
                        divergence,
                        error: None,
                    }
                }
                Err(e) => CutOutcome {
                    cut,
                    pass: false,
                    re_executed: 0,
                    divergence: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(SweepReport {
        golden_instructions: gl.instructions,
        outcomes,
    })
}
