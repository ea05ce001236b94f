//! Lowering of bit-serial arithmetic to array instructions.
//!
//! Operands live one bit per row, LSB first, one lane per column; every
//! instruction acts on all latched lanes at once. A gate reads rows of one
//! parity and writes a row of the other, so values are shuttled between
//! even and odd rows with `COPY` where a schedule needs it.
//!
//! For STT targets each gate is preceded by a `SET0`/`SET1` of its output
//! to the gate preset. SHE targets emit the same stream without them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::array::{TILE_COLS, TILE_ROWS};
use crate::controller::{Machine, MachineConfig, ReductionPlan};
use crate::device::{CellVariant, GateKind};
use crate::error::{Error, Result};
use crate::isa::Instruction;
use crate::svmlab::QuantizedModel;

/// Why an instruction was emitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    /// Output preset ahead of an STT gate.
    Preset,
    /// Constant initialisation, needed on every target.
    Data,
    Compute,
    Control,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(row: u16) -> Parity {
        if row.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn flip(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub rows: Vec<u16>,
}

/// A named operand placed in one lane; `value` is absent for inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub name: String,
    pub tile: u16,
    pub col: u16,
    pub rows: Vec<u16>,
    pub value: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutPlan {
    pub tile: u16,
    /// One logical lane per column.
    pub lanes: Vec<u16>,
    pub regions: Vec<Region>,
    /// Bit-width of the primary operands.
    pub width: u32,
    pub slots: Vec<Slot>,
}

impl LayoutPlan {
    pub fn region(&self, name: &str) -> Option<&[u16]> {
        self.regions
            .iter()
            .find(|r| r.name == name)
            .map(|r| r.rows.as_slice())
    }

    /// Named regions must not share rows. Scratch regions recycle freed rows
    /// and are exempt.
    pub fn check_disjoint(&self) -> Result<()> {
        let mut owner: BTreeMap<u16, &str> = BTreeMap::new();
        for r in self.regions.iter().filter(|r| !r.name.starts_with("scratch")) {
            for &row in &r.rows {
                if let Some(prev) = owner.insert(row, &r.name) {
                    if prev != r.name {
                        return Err(Error::Layout(format!(
                            "row {row} shared by regions `{prev}` and `{}`",
                            r.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub instructions: Vec<Instruction>,
    pub tags: Vec<Tag>,
    pub layout: LayoutPlan,
    pub target: CellVariant,
}

impl Program {
    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    /// Static instruction count per mnemonic.
    pub fn counts(&self) -> BTreeMap<&'static str, usize> {
        let mut m = BTreeMap::new();
        for i in &self.instructions {
            *m.entry(i.mnemonic()).or_insert(0) += 1;
        }
        m
    }

    pub fn count(&self, mnemonic: &str) -> usize {
        self.counts().get(mnemonic).copied().unwrap_or(0)
    }

    pub fn presets(&self) -> usize {
        self.tags.iter().filter(|&&t| t == Tag::Preset).count()
    }

    /// The stream with preset writes removed.
    pub fn without_presets(&self) -> Vec<Instruction> {
        self.instructions
            .iter()
            .zip(&self.tags)
            .filter(|(_, &t)| t != Tag::Preset)
            .map(|(i, _)| *i)
            .collect()
    }
}

/// Checks that every STT gate's output row was set to the gate preset since
/// it was last written, with no activation change in between.
pub fn check_preset_discipline(instrs: &[Instruction]) -> Result<()> {
    let mut epoch = 0u64;
    let mut known: BTreeMap<(u16, u16), (bool, u64)> = BTreeMap::new();
    for (idx, i) in instrs.iter().enumerate() {
        match *i {
            Instruction::ActivateColumns { .. } | Instruction::ActivateRange { .. } => epoch += 1,
            Instruction::WriteBit { tile, row, value } => {
                known.insert((tile, row), (value, epoch));
            }
            Instruction::WriteRow { tile, row } => {
                known.remove(&(tile, row));
            }
            Instruction::Logic { kind, tile, rows } => {
                let preset = kind.spec().preset;
                match known.remove(&(tile, rows.out())) {
                    Some((v, e)) if v == preset && e == epoch => {}
                    _ => {
                        return Err(Error::Layout(format!(
                            "instruction {idx} ({i}): output row {} not preset to {}",
                            rows.out(),
                            preset as u8
                        )))
                    }
                }
            }
            Instruction::ReadRow { .. } | Instruction::Halt => {}
        }
    }
    Ok(())
}

/// Free lists of even and odd rows.
#[derive(Debug, Clone)]
pub struct RowAlloc {
    free: [Vec<u16>; 2],
}

impl Default for RowAlloc {
    fn default() -> Self {
        let mut even: Vec<u16> = (0..TILE_ROWS as u16).step_by(2).collect();
        let mut odd: Vec<u16> = (1..TILE_ROWS as u16).step_by(2).collect();
        // Pop from the end hands out low rows first.
        even.reverse();
        odd.reverse();
        RowAlloc { free: [even, odd] }
    }
}

impl RowAlloc {
    pub fn alloc(&mut self, p: Parity, n: usize) -> Result<Vec<u16>> {
        let list = &mut self.free[p.index()];
        if list.len() < n {
            return Err(Error::Layout(format!(
                "out of {p:?} rows: need {n}, {} free",
                list.len()
            )));
        }
        Ok((0..n).map(|_| list.pop().unwrap()).collect())
    }

    pub fn release(&mut self, rows: &[u16]) {
        for &r in rows {
            let list = &mut self.free[Parity::of(r).index()];
            debug_assert!(!list.contains(&r));
            list.push(r);
        }
        for l in &mut self.free {
            l.sort_unstable_by(|a, b| b.cmp(a));
        }
    }

    pub fn available(&self, p: Parity) -> usize {
        self.free[p.index()].len()
    }
}

/// The seven full-adder temporaries for operands of one parity: `t[3]`
/// shares the operand parity, the rest have the other one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaScratch {
    pub t: [u16; 7],
}

impl FaScratch {
    pub fn parity(&self) -> Parity {
        Parity::of(self.t[3])
    }
}

pub struct Builder {
    tile: u16,
    target: CellVariant,
    code: Vec<Instruction>,
    tags: Vec<Tag>,
    alloc: RowAlloc,
    layout: LayoutPlan,
    scratch: [Option<FaScratch>; 2],
    carries: [Option<[u16; 2]>; 2],
    zero: [Option<u16>; 2],
    inv: [Option<u16>; 2],
}

impl Builder {
    pub fn new(tile: u16, target: CellVariant) -> Self {
        Builder {
            tile,
            target,
            code: Vec::new(),
            tags: Vec::new(),
            alloc: RowAlloc::default(),
            layout: LayoutPlan {
                tile,
                ..LayoutPlan::default()
            },
            scratch: [None; 2],
            carries: [None; 2],
            zero: [None; 2],
            inv: [None; 2],
        }
    }

    pub fn tile(&self) -> u16 {
        self.tile
    }

    pub fn target(&self) -> CellVariant {
        self.target
    }

    pub fn len(&self) -> usize {
        self.code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.code.is_empty()
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.code
    }

    pub fn layout_mut(&mut self) -> &mut LayoutPlan {
        &mut self.layout
    }

    fn push(&mut self, i: Instruction, tag: Tag) {
        self.code.push(i);
        self.tags.push(tag);
    }

    /// Allocates rows and records them as a named region.
    pub fn region(&mut self, name: &str, p: Parity, n: usize) -> Result<Vec<u16>> {
        let rows = self.alloc.alloc(p, n)?;
        self.layout.regions.push(Region {
            name: name.to_string(),
            rows: rows.clone(),
        });
        Ok(rows)
    }

    fn temp(&mut self, p: Parity, n: usize) -> Result<Vec<u16>> {
        self.alloc.alloc(p, n)
    }

    fn release(&mut self, rows: &[u16]) {
        self.alloc.release(rows)
    }

    pub fn activate_range(&mut self, start: u16, end: u16) -> Result<()> {
        let i = Instruction::act_range(self.tile, start, end)?;
        self.push(i, Tag::Control);
        Ok(())
    }

    pub fn activate_cols(&mut self, cols: &[u16]) -> Result<()> {
        let i = Instruction::act_cols(self.tile, cols)?;
        self.push(i, Tag::Control);
        Ok(())
    }

    /// Constant write in every active lane.
    pub fn set_row(&mut self, row: u16, value: bool) -> Result<()> {
        let i = Instruction::set(self.tile, row, value)?;
        self.push(i, Tag::Data);
        Ok(())
    }

    pub fn set_rows(&mut self, rows: &[u16], value: u64) -> Result<()> {
        for (k, &r) in rows.iter().enumerate() {
            self.set_row(r, k < 64 && value >> k & 1 == 1)?;
        }
        Ok(())
    }

    /// One gate, with its preset on STT.
    pub fn gate(&mut self, kind: GateKind, in1: u16, in2: Option<u16>, out: u16) -> Result<()> {
        let logic = Instruction::logic(kind, self.tile, in1, in2, out)?;
        if self.target == CellVariant::Stt {
            let preset = Instruction::set(self.tile, out, kind.spec().preset)?;
            self.push(preset, Tag::Preset);
        }
        self.push(logic, Tag::Compute);
        Ok(())
    }

    pub fn fa_scratch(&mut self, p: Parity) -> Result<FaScratch> {
        if let Some(s) = self.scratch[p.index()] {
            return Ok(s);
        }
        let other = self.alloc.alloc(p.flip(), 6)?;
        let same = self.alloc.alloc(p, 1)?;
        let t = [other[0], other[1], other[2], same[0], other[3], other[4], other[5]];
        let mut rows = t.to_vec();
        rows.sort_unstable();
        self.layout.regions.push(Region {
            name: format!("scratch.fa.{p:?}").to_lowercase(),
            rows,
        });
        let s = FaScratch { t };
        self.scratch[p.index()] = Some(s);
        Ok(s)
    }

    /// A row of parity `p` holding 0 in every lane.
    pub fn zero_row(&mut self, p: Parity) -> Result<u16> {
        if let Some(z) = self.zero[p.index()] {
            return Ok(z);
        }
        let r = self.region(&format!("zero.{p:?}").to_lowercase(), p, 1)?[0];
        self.set_row(r, false)?;
        self.zero[p.index()] = Some(r);
        Ok(r)
    }

    /// Nine NANDs and seven temporaries; `sum` may alias `a` or `b`.
    ///
    /// Two `COPY`s move `t1` and `t5` back to the operand parity, staged in
    /// the `cout` and `sum` rows, which are rewritten afterwards.
    pub fn full_add(&mut self, a: u16, b: u16, cin: u16, sum: u16, cout: u16) -> Result<()> {
        let p = Parity::of(a);
        for (name, r) in [("b", b), ("cin", cin), ("sum", sum), ("cout", cout)] {
            if Parity::of(r) != p {
                return Err(Error::Layout(format!(
                    "full add: {name} row {r} has the wrong parity (a is row {a})"
                )));
            }
        }
        if cout == a || cout == b || cout == cin || cout == sum || sum == cin {
            return Err(Error::Layout(format!(
                "full add: cout {cout} / sum {sum} alias an input"
            )));
        }
        let FaScratch { t } = self.fa_scratch(p)?;
        let [t1, t2, t3, t4, t5, t6, t7] = t;
        use GateKind::{Copy, Nand};
        self.gate(Nand, a, Some(b), t1)?;
        self.gate(Copy, t1, None, cout)?;
        self.gate(Nand, a, Some(cout), t2)?;
        self.gate(Nand, b, Some(cout), t3)?;
        self.gate(Nand, t2, Some(t3), t4)?;
        self.gate(Nand, t4, Some(cin), t5)?;
        self.gate(Copy, t5, None, sum)?;
        self.gate(Nand, t4, Some(sum), t6)?;
        self.gate(Nand, cin, Some(sum), t7)?;
        self.gate(Nand, t6, Some(t7), sum)?;
        self.gate(Nand, t5, Some(t1), cout)?;
        Ok(())
    }

    fn carry_rows(&mut self, p: Parity) -> Result<[u16; 2]> {
        if let Some(c) = self.carries[p.index()] {
            return Ok(c);
        }
        let r = self.region(&format!("scratch.carry.{p:?}").to_lowercase(), p, 2)?;
        let c = [r[0], r[1]];
        self.carries[p.index()] = Some(c);
        Ok(c)
    }

    /// Ripple-carry `sum = a + b + carry_in`. `sum` has `w` rows (wrapping)
    /// or `w + 1` rows (carry out in the last). `sum[i]` may alias `a[i]`
    /// or `b[i]`.
    pub fn add(&mut self, a: &[u16], b: &[u16], sum: &[u16], carry_in: bool) -> Result<()> {
        let w = a.len();
        if w == 0 || b.len() != w || !(sum.len() == w || sum.len() == w + 1) {
            return Err(Error::Layout(format!(
                "add: widths a={} b={} sum={}",
                w,
                b.len(),
                sum.len()
            )));
        }
        let p = Parity::of(a[0]);
        let c = self.carry_rows(p)?;
        self.set_row(c[0], carry_in)?;
        for i in 0..w {
            let cin = c[i % 2];
            let cout = if i + 1 == w && sum.len() == w + 1 {
                sum[w]
            } else {
                c[(i + 1) % 2]
            };
            self.full_add(a[i], b[i], cin, sum[i], cout)?;
        }
        Ok(())
    }

    /// `dst[i] = src[i]` across parity.
    pub fn copy_rows(&mut self, src: &[u16], dst: &[u16]) -> Result<()> {
        for (&s, &d) in src.iter().zip(dst) {
            self.gate(GateKind::Copy, s, None, d)?;
        }
        Ok(())
    }

    /// `dst[i] = !src[i]` with `dst` of the same parity as `src`.
    pub fn invert_rows(&mut self, src: &[u16], dst: &[u16]) -> Result<()> {
        let p = Parity::of(src[0]);
        let tmp = match self.inv[p.index()] {
            Some(r) => r,
            None => {
                let r = self.region(&format!("scratch.inv.{p:?}").to_lowercase(), p.flip(), 1)?[0];
                self.inv[p.index()] = Some(r);
                r
            }
        };
        for (&s, &d) in src.iter().zip(dst) {
            self.gate(GateKind::Not, s, None, tmp)?;
            self.gate(GateKind::Copy, tmp, None, d)?;
        }
        Ok(())
    }

    /// `diff = a - b` as `a + !b + 1`. With `w + 1` rows the last holds
    /// the no-borrow flag (`a >= b`).
    pub fn sub(&mut self, a: &[u16], b: &[u16], diff: &[u16]) -> Result<()> {
        let p = Parity::of(b[0]);
        let nb = self.temp(p, b.len())?;
        self.invert_rows(b, &nb)?;
        self.add(a, &nb, diff, true)?;
        self.release(&nb);
        Ok(())
    }

    /// In-place two's-complement negation, modulo `2^rows.len()`.
    pub fn negate(&mut self, rows: &[u16]) -> Result<()> {
        let p = Parity::of(rows[0]);
        let z = self.zero_row(p)?;
        let zeros = vec![z; rows.len()];
        self.sub(&zeros, rows, rows)
    }

    /// Shift-and-add `prod = a * b`; `prod.len() == a.len() + b.len()`.
    /// Operands of the product parity are first copied across.
    pub fn mult(&mut self, a: &[u16], b: &[u16], prod: &[u16]) -> Result<()> {
        let (wa, wb) = (a.len(), b.len());
        if wa == 0 || wb == 0 || prod.len() != wa + wb {
            return Err(Error::Layout(format!(
                "mult: widths a={wa} b={wb} prod={}",
                prod.len()
            )));
        }
        let pp_par = Parity::of(prod[0]);
        let op_par = pp_par.flip();
        let mut temps = Vec::new();
        let mut across = |me: &mut Self, x: &[u16]| -> Result<Vec<u16>> {
            if Parity::of(x[0]) == op_par {
                return Ok(x.to_vec());
            }
            let t = me.temp(op_par, x.len())?;
            me.copy_rows(x, &t)?;
            temps.extend_from_slice(&t);
            Ok(t)
        };
        let a = across(self, a)?;
        let b = if b == a.as_slice() { a.clone() } else { across(self, b)? };

        for (i, &ai) in a.iter().enumerate() {
            self.gate(GateKind::And, ai, Some(b[0]), prod[i])?;
        }
        for &r in &prod[wa..] {
            self.set_row(r, false)?;
        }
        if wb > 1 {
            let pp = self.temp(pp_par, wa)?;
            for j in 1..wb {
                for (i, &ai) in a.iter().enumerate() {
                    self.gate(GateKind::And, ai, Some(b[j]), pp[i])?;
                }
                let acc: Vec<u16> = prod[j..j + wa].to_vec();
                self.add(&acc, &pp, &prod[j..j + wa + 1], false)?;
            }
            self.release(&pp);
        }
        self.release(&temps);
        Ok(())
    }

    /// Number of features where both binary vectors are 1. Returns the rows
    /// of the count, `ceil(log2 n) + 1` bits.
    pub fn binary_dot(&mut self, x: &[u16], w: &[u16]) -> Result<Vec<u16>> {
        let n = x.len();
        if n == 0 || w.len() != n {
            return Err(Error::Layout(format!("binary dot: lengths {} and {}", n, w.len())));
        }
        let op_par = Parity::of(x[0]);
        if w.iter().chain(x).any(|&r| Parity::of(r) != op_par) {
            return Err(Error::Layout("binary dot operands must share parity".into()));
        }
        let p = op_par.flip();
        let bits = self.temp(p, n)?;
        for i in 0..n {
            self.gate(GateKind::And, x[i], Some(w[i]), bits[i])?;
        }
        let mut level: Vec<Vec<u16>> = bits.iter().map(|&b| vec![b]).collect();
        while level.len() > 1 {
            let mut next = Vec::with_capacity(level.len().div_ceil(2));
            let mut it = level.into_iter();
            while let Some(a) = it.next() {
                match it.next() {
                    None => next.push(a),
                    Some(b) => {
                        let width = a.len().max(b.len());
                        let z = self.zero_row(p)?;
                        let pad = |v: &Vec<u16>| {
                            let mut v = v.clone();
                            v.resize(width, z);
                            v
                        };
                        let sum = self.temp(p, width + 1)?;
                        self.add(&pad(&a), &pad(&b), &sum, false)?;
                        self.release(&a);
                        self.release(&b);
                        next.push(sum);
                    }
                }
            }
            level = next;
        }
        Ok(level.pop().unwrap())
    }

    pub fn finish(mut self) -> Program {
        self.push(Instruction::Halt, Tag::Control);
        Program {
            instructions: self.code,
            tags: self.tags,
            layout: self.layout,
            target: self.target,
        }
    }
}

fn lanes_range(lanes: usize) -> Result<(u16, u16)> {
    if lanes == 0 || lanes > TILE_COLS {
        return Err(Error::Layout(format!("lane count {lanes} outside 1..=1024")));
    }
    Ok((0, lanes as u16 - 1))
}

/// Stand-alone full adder over lanes `0..lanes`: regions `a`, `b`, `cin`,
/// `sum`, `cout`, all even.
pub fn lower_fulladd(lanes: usize, target: CellVariant) -> Result<Program> {
    let (s, e) = lanes_range(lanes)?;
    let mut b = Builder::new(0, target);
    b.activate_range(s, e)?;
    let r: Vec<u16> = ["a", "b", "cin", "sum", "cout"]
        .iter()
        .map(|n| b.region(n, Parity::Even, 1).map(|v| v[0]))
        .collect::<Result<_>>()?;
    b.full_add(r[0], r[1], r[2], r[3], r[4])?;
    b.layout.width = 1;
    b.layout.lanes = (s..=e).collect();
    Ok(b.finish())
}

/// `sum = a + b` over `width`-bit operands: regions `a`, `b` (even) and
/// `sum` with `width + 1` rows.
pub fn lower_add(width: usize, lanes: usize, target: CellVariant) -> Result<Program> {
    binary_op(width, lanes, target, |b, x, y, out| b.add(x, y, out, false))
}

/// `diff = a - b`: `width` low bits of the difference plus a no-borrow flag.
pub fn lower_sub(width: usize, lanes: usize, target: CellVariant) -> Result<Program> {
    binary_op(width, lanes, target, |b, x, y, out| b.sub(x, y, out))
}

fn binary_op(
    width: usize,
    lanes: usize,
    target: CellVariant,
    f: impl FnOnce(&mut Builder, &[u16], &[u16], &[u16]) -> Result<()>,
) -> Result<Program> {
    if width == 0 {
        return Err(Error::Layout("width must be >= 1".into()));
    }
    let (s, e) = lanes_range(lanes)?;
    let mut b = Builder::new(0, target);
    b.activate_range(s, e)?;
    let x = b.region("a", Parity::Even, width)?;
    let y = b.region("b", Parity::Even, width)?;
    let out = b.region("result", Parity::Even, width + 1)?;
    f(&mut b, &x, &y, &out)?;
    b.layout.width = width as u32;
    b.layout.lanes = (s..=e).collect();
    Ok(b.finish())
}

/// `product = a * b`: odd operand regions `a`, `b`; even `result` with
/// `2 * width` rows.
pub fn lower_mult(width: usize, lanes: usize, target: CellVariant) -> Result<Program> {
    if width == 0 {
        return Err(Error::Layout("width must be >= 1".into()));
    }
    let (s, e) = lanes_range(lanes)?;
    let mut b = Builder::new(0, target);
    b.activate_range(s, e)?;
    let x = b.region("a", Parity::Odd, width)?;
    let y = b.region("b", Parity::Odd, width)?;
    let out = b.region("result", Parity::Even, 2 * width)?;
    b.mult(&x, &y, &out)?;
    b.layout.width = width as u32;
    b.layout.lanes = (s..=e).collect();
    Ok(b.finish())
}

/// Popcount of `x AND w` for `n_features`-bit binary vectors in odd rows.
pub fn lower_binary_dot(n_features: usize, lanes: usize, target: CellVariant) -> Result<Program> {
    let (s, e) = lanes_range(lanes)?;
    let mut b = Builder::new(0, target);
    b.activate_range(s, e)?;
    let x = b.region("a", Parity::Odd, n_features)?;
    let w = b.region("b", Parity::Odd, n_features)?;
    let out = b.binary_dot(&x, &w)?;
    b.layout.regions.push(Region {
        name: "result".into(),
        rows: out,
    });
    b.layout.width = 1;
    b.layout.lanes = (s..=e).collect();
    Ok(b.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmCodegenConfig {
    pub target: CellVariant,
    pub tile: u16,
    pub score_tile: u16,
}

impl Default for SvmCodegenConfig {
    fn default() -> Self {
        SvmCodegenConfig {
            target: CellVariant::Stt,
            tile: 0,
            score_tile: 1,
        }
    }
}

/// One support vector's lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaneInfo {
    pub col: u16,
    pub class: usize,
    /// Index of the support vector within its class.
    pub sv: usize,
    pub negative: bool,
}

/// A generated inference program plus everything needed to load and read it.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmProgram {
    pub program: Program,
    pub lanes: Vec<LaneInfo>,
    /// Rows of feature `f` of the input, in every lane.
    pub x_rows: Vec<Vec<u16>>,
    pub reduction: ReductionPlan,
    pub n_features: usize,
}

impl SvmProgram {
    pub fn layout_file(&self) -> LayoutFile {
        LayoutFile {
            layout: self.program.layout.clone(),
            inputs: self.x_rows.clone(),
            reduction: Some(self.reduction.clone()),
        }
    }

    /// Input slots for `x`, one per feature per lane.
    pub fn input_slots(&self, x: &[u8]) -> Result<Vec<Slot>> {
        if x.len() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let tile = self.program.layout.tile;
        Ok(self
            .lanes
            .iter()
            .flat_map(|l| {
                self.x_rows.iter().zip(x).enumerate().map(move |(f, (rows, &v))| Slot {
                    name: format!("x[{f}]"),
                    tile,
                    col: l.col,
                    rows: rows.clone(),
                    value: Some(v as u64),
                })
            })
            .collect())
    }
}

/// Layout report written next to a generated program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutFile {
    pub layout: LayoutPlan,
    /// Rows of input element `i`, loaded into every lane.
    #[serde(default)]
    pub inputs: Vec<Vec<u16>>,
    #[serde(default)]
    pub reduction: Option<ReductionPlan>,
}

impl LayoutFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("layout file: {e}")))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
        s.push('\n');
        s
    }

    /// Loads constants and, when given, the input vector.
    pub fn preload(&self, machine: &mut Machine, input: Option<&[u8]>) -> Result<()> {
        preload(machine, &self.layout.slots)?;
        match input {
            Some(x) if x.len() != self.inputs.len() => Err(Error::Dimension {
                expected: self.inputs.len(),
                got: x.len(),
            }),
            Some(x) => {
                let tile = self.layout.tile;
                for &col in &self.layout.lanes {
                    for (rows, &v) in self.inputs.iter().zip(x) {
                        machine.tile_mut(tile).store_uint(col, rows, v as u64);
                    }
                }
                Ok(())
            }
            None => Ok(()),
        }
    }
}

/// Writes every slot that carries a value.
pub fn preload(machine: &mut Machine, slots: &[Slot]) -> Result<()> {
    for s in slots {
        if let Some(v) = s.value {
            if s.col as usize >= TILE_COLS || s.rows.iter().any(|&r| r as usize >= TILE_ROWS) {
                return Err(Error::Layout(format!("slot `{}` outside the tile", s.name)));
            }
            machine.tile_mut(s.tile).store_uint(s.col, &s.rows, v);
        }
    }
    Ok(())
}
impl SvmProgram {

    /// A machine with the model constants and input `x` loaded.
    pub fn machine(&self, cfg: MachineConfig, x: &[u8]) -> Result<Machine> {
        let mut m = Machine::from_program(cfg, &self.program.instructions)?
            .with_reduction(self.reduction.clone())?;
        preload(&mut m, &self.program.layout.slots)?;
        preload(&mut m, &self.input_slots(x)?)?;
        Ok(m)
    }
}

/// Emits the kernel-SVM inference program for a quantized model.
///
/// Lane `l` holds one support vector. Per lane: `dot = sum x_f * sv_f`,
/// `t = (dot + c0) >> s`, `k = t * t`, `term = |alpha| * k`; lanes with a
/// negative coefficient are grouped in one column range and negated in
/// place. After `Halt` the controller sums terms per class and subtracts
/// the bias.
pub fn codegen_svm(model: &QuantizedModel, cfg: &SvmCodegenConfig) -> Result<SvmProgram> {
    model.validate()?;
    let f = model.n_features;
    let mut lanes: Vec<LaneInfo> = model
        .classes
        .iter()
        .enumerate()
        .flat_map(|(c, cl)| {
            cl.svs.iter().enumerate().map(move |(i, sv)| LaneInfo {
                col: 0,
                class: c,
                sv: i,
                negative: sv.alpha < 0,
            })
        })
        .collect();
    if lanes.is_empty() {
        return Err(Error::Model("model has no support vectors".into()));
    }
    if lanes.len() > TILE_COLS {
        return Err(Error::Model(format!(
            "{} support vectors exceed the {} lanes of one tile",
            lanes.len(),
            TILE_COLS
        )));
    }
    lanes.sort_by_key(|l| (l.negative, l.class, l.sv));
    for (i, l) in lanes.iter_mut().enumerate() {
        l.col = i as u16;
    }

    let widths = model.widths();
    let mut b = Builder::new(cfg.tile, cfg.target);
    let last = lanes.len() as u16 - 1;
    b.activate_range(0, last)?;

    let x_rows: Vec<Vec<u16>> = (0..f)
        .map(|i| b.region(&format!("x[{i}]"), Parity::Odd, 8))
        .collect::<Result<_>>()?;
    let sv_rows: Vec<Vec<u16>> = (0..f)
        .map(|i| b.region(&format!("sv[{i}]"), Parity::Odd, 8))
        .collect::<Result<_>>()?;
    let alpha_rows = b.region("alpha", Parity::Odd, widths.alpha)?;
    let dot = b.region("dot", Parity::Even, widths.dot)?;

    // dot = sum_f x_f * sv_f
    let prod = b.temp(Parity::Even, 16)?;
    for i in 0..f {
        if i == 0 {
            let head = &dot[..16.min(widths.dot)];
            if head.len() == 16 {
                b.mult(&x_rows[0], &sv_rows[0], head)?;
                b.set_rows(&dot[16..], 0)?;
                continue;
            }
        }
        b.mult(&x_rows[i], &sv_rows[i], &prod)?;
        let z = b.zero_row(Parity::Even)?;
        let mut addend = prod.clone();
        addend.resize(widths.dot, z);
        addend.truncate(widths.dot);
        let acc = dot.clone();
        b.add(&acc, &addend, &dot, false)?;
    }
    b.release(&prod);

    // t = (dot + c0) >> s
    if model.c0_q > 0 {
        let c0 = b.region("c0", Parity::Even, widths.dot)?;
        b.set_rows(&c0, model.c0_q)?;
        let acc = dot.clone();
        b.add(&acc, &c0, &dot, false)?;
    }
    let s = model.shift as usize;
    let t_even: Vec<u16> = dot[s..s + widths.t].to_vec();
    let t = b.region("t", Parity::Odd, widths.t)?;
    b.copy_rows(&t_even, &t)?;

    // k = t * t
    let k = b.region("k", Parity::Even, 2 * widths.t)?;
    b.mult(&t, &t, &k)?;
    let k_odd = b.region("k.odd", Parity::Odd, 2 * widths.t)?;
    b.copy_rows(&k, &k_odd)?;

    // term = |alpha| * k, widened by a sign row
    let term = b.region("term", Parity::Even, widths.term)?;
    let mag = 2 * widths.t + widths.alpha;
    b.mult(&k_odd, &alpha_rows, &term[..mag])?;
    b.set_rows(&term[mag..], 0)?;

    let first_neg = lanes.iter().position(|l| l.negative);
    if let Some(fst) = first_neg {
        b.activate_range(fst as u16, last)?;
        b.negate(&term)?;
    }

    let mut slots = Vec::new();
    for l in &lanes {
        let sv = &model.classes[l.class].svs[l.sv];
        for (i, &v) in sv.values.iter().enumerate() {
            slots.push(Slot {
                name: format!("sv[{i}]"),
                tile: cfg.tile,
                col: l.col,
                rows: sv_rows[i].clone(),
                value: Some(v as u64),
            });
        }
        slots.push(Slot {
            name: "alpha".into(),
            tile: cfg.tile,
            col: l.col,
            rows: alpha_rows.clone(),
            value: Some(sv.alpha.unsigned_abs() as u64),
        });
        for (i, rows) in x_rows.iter().enumerate() {
            slots.push(Slot {
                name: format!("x[{i}]"),
                tile: cfg.tile,
                col: l.col,
                rows: rows.clone(),
                value: None,
            });
        }
    }
    let layout = b.layout_mut();
    layout.lanes = (0..=last).collect();
    layout.width = 8;
    layout.slots = slots;

    let reduction = ReductionPlan {
        term_tile: cfg.tile,
        term_rows: term,
        lanes: lanes.iter().map(|l| (l.col, l.class)).collect(),
        rho: model.classes.iter().map(|c| c.rho_q).collect(),
        score_tile: cfg.score_tile,
    };
    let program = b.finish();
    program.layout.check_disjoint()?;
    Ok(SvmProgram {
        program,
        lanes,
        x_rows,
        reduction,
        n_features: f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::Tile;
    use crate::device::PulseCompletion;

    /// Plays a program directly on one tile, ignoring timing.
    fn play(p: &Program, tile: &mut Tile) {
        for i in &p.instructions {
            match *i {
                Instruction::Logic { kind, rows, .. } => {
                    tile.logic_op(kind, rows, 1.0, PulseCompletion::Deterministic)
                        .unwrap();
                }
                Instruction::WriteBit { row, value, .. } => {
                    tile.write_bit(row, value, 1.0, PulseCompletion::Deterministic)
                        .unwrap();
                }
                Instruction::ActivateRange { start, end, .. } => {
                    tile.activate_range(start, end).unwrap()
                }
                Instruction::ActivateColumns { cols, .. } => {
                    tile.activate_columns(cols.as_slice()).unwrap()
                }
                Instruction::Halt => break,
                _ => unreachable!(),
            }
        }
    }

    fn variant_tile(p: &Program) -> Tile {
        let mut t = Tile::new(p.target);
        t.strict_presets = p.target == CellVariant::Stt;
        t
    }

    #[test]
    fn full_adder_counts_and_truth_table() {
        for target in [CellVariant::Stt, CellVariant::She] {
            let p = lower_fulladd(8, target).unwrap();
            assert_eq!(p.count("NAND"), 9);
            let scratch: Vec<u16> = p
                .layout
                .regions
                .iter()
                .filter(|r| r.name.starts_with("scratch.fa"))
                .flat_map(|r| r.rows.clone())
                .collect();
            assert_eq!(scratch.len(), 7);
            let presets = p.presets();
            assert_eq!(presets, if target == CellVariant::Stt { 11 } else { 0 });
            let mut t = variant_tile(&p);
            let r = |n| p.layout.region(n).unwrap()[0];
            for c in 0..8u16 {
                t.set(r("a"), c, c & 1 == 1);
                t.set(r("b"), c, c & 2 == 2);
                t.set(r("cin"), c, c & 4 == 4);
            }
            play(&p, &mut t);
            for c in 0..8u16 {
                let total = (c & 1) + (c >> 1 & 1) + (c >> 2 & 1);
                assert_eq!(t.get(r("sum"), c), total & 1 == 1, "col {c}");
                assert_eq!(t.get(r("cout"), c), total >= 2, "col {c}");
            }
        }
    }

    #[test]
    fn stt_and_she_differ_only_by_presets() {
        for (stt, she) in [
            (lower_mult(4, 16, CellVariant::Stt), lower_mult(4, 16, CellVariant::She)),
            (lower_sub(4, 16, CellVariant::Stt), lower_sub(4, 16, CellVariant::She)),
            (lower_binary_dot(7, 16, CellVariant::Stt), lower_binary_dot(7, 16, CellVariant::She)),
        ] {
            let (stt, she) = (stt.unwrap(), she.unwrap());
            assert_eq!(stt.without_presets(), she.instructions);
            assert!(stt.len() > she.len());
            check_preset_discipline(&stt.instructions).unwrap();
        }
    }

    #[test]
    fn preset_checker_catches_missing_preset() {
        let p = lower_add(2, 4, CellVariant::She).unwrap();
        assert!(check_preset_discipline(&p.instructions).is_err());
        let p = lower_add(2, 4, CellVariant::Stt).unwrap();
        check_preset_discipline(&p.instructions).unwrap();
    }

    #[test]
    fn allocator_respects_parity_and_runs_out() {
        let mut a = RowAlloc::default();
        let e = a.alloc(Parity::Even, 3).unwrap();
        assert_eq!(e, vec![0, 2, 4]);
        let o = a.alloc(Parity::Odd, 2).unwrap();
        assert_eq!(o, vec![1, 3]);
        a.release(&e);
        assert_eq!(a.alloc(Parity::Even, 1).unwrap(), vec![0]);
        assert!(a.alloc(Parity::Odd, 600).is_err());
    }

    #[test]
    fn add_and_sub_small_exhaustive() {
        for target in [CellVariant::Stt, CellVariant::She] {
            let add = lower_add(4, 256, target).unwrap();
            let sub = lower_sub(4, 256, target).unwrap();
            for (p, f) in [
                (&add, (|a: u64, b: u64| a + b) as fn(u64, u64) -> u64),
                (&sub, |a, b| (a.wrapping_sub(b) & 0xf) | ((a >= b) as u64) << 4),
            ] {
                let mut t = variant_tile(p);
                let (ra, rb, rr) = (
                    p.layout.region("a").unwrap().to_vec(),
                    p.layout.region("b").unwrap().to_vec(),
                    p.layout.region("result").unwrap().to_vec(),
                );
                for c in 0..256u16 {
                    t.store_uint(c, &ra, c as u64 & 0xf);
                    t.store_uint(c, &rb, c as u64 >> 4);
                }
                play(p, &mut t);
                for c in 0..256u64 {
                    assert_eq!(t.load_uint(c as u16, &rr), f(c & 0xf, c >> 4), "{target:?} col {c}");
                }
            }
        }
    }

    #[test]
    fn mult_small_exhaustive() {
        let p = lower_mult(4, 256, CellVariant::Stt).unwrap();
        let mut t = variant_tile(&p);
        let (ra, rb, rr) = (
            p.layout.region("a").unwrap().to_vec(),
            p.layout.region("b").unwrap().to_vec(),
            p.layout.region("result").unwrap().to_vec(),
        );
        for c in 0..256u16 {
            t.store_uint(c, &ra, c as u64 & 0xf);
            t.store_uint(c, &rb, c as u64 >> 4);
        }
        play(&p, &mut t);
        for c in 0..256u64 {
            assert_eq!(t.load_uint(c as u16, &rr), (c & 0xf) * (c >> 4));
        }
    }

    #[test]
    fn negate_in_place() {
        let mut b = Builder::new(0, CellVariant::Stt);
        b.activate_range(0, 15).unwrap();
        let r = b.region("v", Parity::Even, 6).unwrap();
        b.negate(&r).unwrap();
        let p = b.finish();
        let mut t = variant_tile(&p);
        for c in 0..16u16 {
            t.store_uint(c, &r, c as u64 * 3);
        }
        play(&p, &mut t);
        for c in 0..16u64 {
            assert_eq!(t.load_uint(c as u16, &r), (c * 3).wrapping_neg() & 63);
        }
    }

    fn random_model(seed: u64, classes: usize, svs: usize, features: usize) -> crate::svmlab::SvmModel {
        use crate::svmlab::{ClassModel, SupportVector, SvmModel};
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        SvmModel {
            n_features: features,
            degree: 2,
            gamma: 1.0 / 4096.0,
            coef0: 1.0,
            classes: (0..classes)
                .map(|_| ClassModel {
                    rho: rng.gen_range(-5.0..5.0),
                    svs: (0..svs)
                        .map(|_| SupportVector {
                            alpha: rng.gen_range(-1.0..1.0),
                            values: (0..features).map(|_| rng.gen_range(0..=255) as f64).collect(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn svm_program_matches_oracle() {
        use crate::power::PowerTrace;
        use crate::svmlab::{oracle_infer, quantize, QuantWidths};
        use rand::{Rng, SeedableRng};
        let q = quantize(&random_model(3, 3, 4, 8), QuantWidths::default()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for target in [CellVariant::Stt, CellVariant::She] {
            let cfg = SvmCodegenConfig { target, ..Default::default() };
            let prog = codegen_svm(&q, &cfg).unwrap();
            if target == CellVariant::Stt {
                check_preset_discipline(&prog.program.instructions).unwrap();
            }
            let params = match target {
                CellVariant::Stt => crate::device::DeviceParams::future_stt(),
                CellVariant::She => crate::device::DeviceParams::future_she(),
            };
            for _ in 0..10 {
                let x: Vec<u8> = (0..8).map(|_| rng.gen()).collect();
                let mut m = prog.machine(MachineConfig::with_params(params), &x).unwrap();
                m.run(&PowerTrace::continuous(), None).unwrap();
                let (want, _) = oracle_infer(&q, &x).unwrap();
                assert_eq!(m.scores().unwrap(), want, "{target:?} x={x:?}");
            }
        }
    }

    #[test]
    fn svm_she_is_shorter() {
        use crate::svmlab::{quantize, QuantWidths};
        let q = quantize(&random_model(5, 2, 3, 4), QuantWidths::default()).unwrap();
        let stt = codegen_svm(&q, &SvmCodegenConfig::default()).unwrap();
        let she = codegen_svm(&q, &SvmCodegenConfig { target: CellVariant::She, ..Default::default() }).unwrap();
        assert_eq!(stt.program.without_presets(), she.program.instructions);
        assert!(she.program.len() < stt.program.len());
    }

    #[test]
    fn bad_layouts_rejected() {
        let mut b = Builder::new(0, CellVariant::Stt);
        assert!(b.full_add(0, 2, 4, 6, 7).is_err());
        assert!(b.full_add(0, 2, 4, 6, 0).is_err());
        assert!(b.add(&[0, 2], &[4], &[6, 8], false).is_err());
        assert!(lower_add(0, 4, CellVariant::Stt).is_err());
        assert!(lower_add(4, 0, CellVariant::Stt).is_err());
        assert!(lower_add(4, 2000, CellVariant::Stt).is_err());
        assert!(lower_mult(300, 4, CellVariant::Stt).is_err());
    }
}
