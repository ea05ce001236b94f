//! One compute tile: a 1024x1024 grid of MTJ cells with a column latch.
//!
//! Rows are stored bit-packed, sixteen `u64` words per row, bit `c % 64` of
//! word `c / 64` holding column `c`. A logic instruction applies the same
//! gate in every latched column at once, so each row operation is a handful
//! of word-wide boolean ops.

use serde::{Deserialize, Serialize};

use crate::device::{CellVariant, GateKind, PulseCompletion, SwitchDirection};
use crate::error::{Error, Result};

pub const TILE_ROWS: usize = 1024;
pub const TILE_COLS: usize = 1024;
pub const WORDS_PER_ROW: usize = TILE_COLS / 64;
pub const NUM_TILES: usize = 512;
pub const MAX_ACTIVATE_COLUMNS: usize = 5;

pub type RowBits = [u64; WORDS_PER_ROW];

fn check_row(row: u16) -> Result<()> {
    if row as usize >= TILE_ROWS {
        return Err(Error::OutOfRange {
            what: "row",
            value: row as u64,
            limit: TILE_ROWS as u64,
        });
    }
    Ok(())
}

fn check_col(col: u16) -> Result<()> {
    if col as usize >= TILE_COLS {
        return Err(Error::OutOfRange {
            what: "column",
            value: col as u64,
            limit: TILE_COLS as u64,
        });
    }
    Ok(())
}

pub fn check_tile(tile: u16) -> Result<()> {
    if tile as usize >= NUM_TILES {
        return Err(Error::OutOfRange {
            what: "tile",
            value: tile as u64,
            limit: NUM_TILES as u64,
        });
    }
    Ok(())
}

/// A set of columns as a 1024-bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ColumnMask(pub RowBits);

impl ColumnMask {
    pub fn empty() -> Self {
        ColumnMask([0; WORDS_PER_ROW])
    }

    pub fn full() -> Self {
        ColumnMask([u64::MAX; WORDS_PER_ROW])
    }

    pub fn from_cols(cols: &[u16]) -> Result<Self> {
        let mut m = Self::empty();
        for &c in cols {
            check_col(c)?;
            m.insert(c);
        }
        Ok(m)
    }

    /// Inclusive range.
    pub fn range(start: u16, end: u16) -> Result<Self> {
        check_col(start)?;
        check_col(end)?;
        let mut m = Self::empty();
        for c in start.min(end)..=end.max(start) {
            m.insert(c);
        }
        Ok(m)
    }

    pub fn insert(&mut self, col: u16) {
        self.0[col as usize / 64] |= 1 << (col % 64);
    }

    pub fn contains(&self, col: u16) -> bool {
        self.0[col as usize / 64] >> (col % 64) & 1 == 1
    }

    pub fn count(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = u16> + '_ {
        (0..TILE_COLS as u16).filter(move |&c| self.contains(c))
    }
}

/// Input/output rows of a logic operation. Construction enforces the bit-line
/// parity rule: inputs share a parity, the output has the other one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RowTriple {
    in1: u16,
    in2: Option<u16>,
    out: u16,
}

impl RowTriple {
    pub fn new(in1: u16, in2: Option<u16>, out: u16) -> Result<Self> {
        check_row(in1)?;
        check_row(out)?;
        if let Some(r) = in2 {
            check_row(r)?;
        }
        let second = in2.unwrap_or(in1);
        if in1 % 2 != second % 2 || in1 % 2 == out % 2 {
            return Err(Error::Parity {
                in1,
                in2: second,
                out,
            });
        }
        Ok(RowTriple { in1, in2, out })
    }

    pub fn unary(input: u16, out: u16) -> Result<Self> {
        Self::new(input, None, out)
    }

    pub fn binary(in1: u16, in2: u16, out: u16) -> Result<Self> {
        Self::new(in1, Some(in2), out)
    }

    pub fn in1(&self) -> u16 {
        self.in1
    }

    pub fn in2(&self) -> Option<u16> {
        self.in2
    }

    pub fn out(&self) -> u16 {
        self.out
    }

    /// Second input as carried in the encoding; unary gates mirror `in1`.
    pub fn in2_or_mirror(&self) -> u16 {
        self.in2.unwrap_or(self.in1)
    }
}

/// The 128-byte buffer between tiles, viewed as one row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RowBuffer {
    pub bits: RowBits,
}

impl RowBuffer {
    pub fn get(&self, col: u16) -> bool {
        self.bits[col as usize / 64] >> (col % 64) & 1 == 1
    }

    pub fn set(&mut self, col: u16, v: bool) {
        let w = &mut self.bits[col as usize / 64];
        let m = 1u64 << (col % 64);
        if v {
            *w |= m
        } else {
            *w &= !m
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellAddress {
    pub tile: u16,
    pub row: u16,
    pub col: u16,
}

impl CellAddress {
    pub fn new(tile: u16, row: u16, col: u16) -> Result<Self> {
        check_tile(tile)?;
        check_row(row)?;
        check_col(col)?;
        Ok(CellAddress { tile, row, col })
    }
}

impl std::fmt::Display for CellAddress {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(tile {}, row {}, col {})", self.tile, self.row, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tile {
    rows: Box<[RowBits]>,
    active: ColumnMask,
    variant: CellVariant,
    /// Reject STT logic whose active outputs are not at the gate preset.
    pub strict_presets: bool,
}

impl Tile {
    pub fn new(variant: CellVariant) -> Self {
        Tile {
            rows: vec![[0u64; WORDS_PER_ROW]; TILE_ROWS].into_boxed_slice(),
            active: ColumnMask::empty(),
            variant,
            strict_presets: false,
        }
    }

    pub fn variant(&self) -> CellVariant {
        self.variant
    }

    pub fn active_columns(&self) -> &ColumnMask {
        &self.active
    }

    pub fn get(&self, row: u16, col: u16) -> bool {
        self.rows[row as usize][col as usize / 64] >> (col % 64) & 1 == 1
    }

    /// Direct cell write, bypassing the latch. Used for preloading data.
    pub fn set(&mut self, row: u16, col: u16, v: bool) {
        let w = &mut self.rows[row as usize][col as usize / 64];
        let m = 1u64 << (col % 64);
        if v {
            *w |= m
        } else {
            *w &= !m
        }
    }

    pub fn row(&self, row: u16) -> &RowBits {
        &self.rows[row as usize]
    }

    /// Writes `value` bit-serially into `rows` (LSB first) of one column.
    pub fn store_uint(&mut self, col: u16, rows: &[u16], value: u64) {
        for (i, &r) in rows.iter().enumerate() {
            self.set(r, col, i < 64 && value >> i & 1 == 1);
        }
    }

    pub fn load_uint(&self, col: u16, rows: &[u16]) -> u64 {
        rows.iter()
            .enumerate()
            .filter(|&(i, &r)| i < 64 && self.get(r, col))
            .fold(0, |acc, (i, _)| acc | 1 << i)
    }

    /// Replaces the latched set. Duplicates collapse, so re-issuing the same
    /// activation is a no-op.
    pub fn activate_columns(&mut self, cols: &[u16]) -> Result<()> {
        if cols.is_empty() || cols.len() > MAX_ACTIVATE_COLUMNS {
            return Err(Error::ActivationCount(cols.len()));
        }
        self.active = ColumnMask::from_cols(cols)?;
        Ok(())
    }

    pub fn activate_range(&mut self, start: u16, end: u16) -> Result<()> {
        self.active = ColumnMask::range(start, end)?;
        Ok(())
    }

    pub fn set_active(&mut self, mask: ColumnMask) {
        self.active = mask;
    }

    /// Latches are volatile.
    pub fn clear_latch(&mut self) {
        self.active = ColumnMask::empty();
    }

    /// Applies `kind` in every active column. Returns the number of output
    /// cells that changed state.
    pub fn logic_op(
        &mut self,
        kind: GateKind,
        rows: RowTriple,
        pulse_fraction: f64,
        completion: PulseCompletion,
    ) -> Result<u32> {
        let spec = kind.spec();
        let a = self.rows[rows.in1() as usize];
        let b = self.rows[rows.in2_or_mirror() as usize];
        let old = self.rows[rows.out() as usize];
        let act = self.active.0;

        if self.variant == CellVariant::Stt && self.strict_presets {
            for w in 0..WORDS_PER_ROW {
                let wrong = if spec.preset { !old[w] } else { old[w] } & act[w];
                if wrong != 0 {
                    let col = (w * 64) as u16 + wrong.trailing_zeros() as u16;
                    return Err(Error::Preset {
                        gate: kind.name(),
                        row: rows.out(),
                        col,
                        preset: spec.preset as u8,
                    });
                }
            }
        }

        let mut new = old;
        let done = completion.completes(pulse_fraction);
        for w in 0..WORDS_PER_ROW {
            match self.variant {
                CellVariant::Stt => {
                    if !done {
                        continue;
                    }
                    let switch = match kind {
                        GateKind::Or | GateKind::Nor => !(a[w] | b[w]),
                        _ => !(a[w] & b[w]),
                    } & act[w];
                    new[w] = match spec.direction {
                        SwitchDirection::SetOnly => old[w] | switch,
                        SwitchDirection::ResetOnly => old[w] & !switch,
                    };
                }
                CellVariant::She => {
                    if !done {
                        continue;
                    }
                    let f = match kind {
                        GateKind::Not => !a[w],
                        GateKind::Copy => a[w],
                        GateKind::And => a[w] & b[w],
                        GateKind::Nand => !(a[w] & b[w]),
                        GateKind::Or => a[w] | b[w],
                        GateKind::Nor => !(a[w] | b[w]),
                    };
                    new[w] = (old[w] & !act[w]) | (f & act[w]);
                }
            }
        }
        self.rows[rows.out() as usize] = new;
        Ok(old.iter().zip(&new).map(|(o, n)| (o ^ n).count_ones()).sum())
    }

    /// Writes `value` at `row` in every active column. Returns flipped cells.
    pub fn write_bit(
        &mut self,
        row: u16,
        value: bool,
        pulse_fraction: f64,
        completion: PulseCompletion,
    ) -> Result<u32> {
        check_row(row)?;
        if !completion.completes(pulse_fraction) {
            return Ok(0);
        }
        let r = &mut self.rows[row as usize];
        let mut flips = 0;
        for w in 0..WORDS_PER_ROW {
            let old = r[w];
            r[w] = if value {
                old | self.active.0[w]
            } else {
                old & !self.active.0[w]
            };
            flips += (old ^ r[w]).count_ones();
        }
        Ok(flips)
    }

    /// Non-destructive read of all 1024 columns.
    pub fn read_row(&self, row: u16) -> Result<RowBuffer> {
        check_row(row)?;
        Ok(RowBuffer {
            bits: self.rows[row as usize],
        })
    }

    /// Writes the buffer into `row`, masked by the active columns.
    pub fn write_row(
        &mut self,
        row: u16,
        buf: &RowBuffer,
        pulse_fraction: f64,
        completion: PulseCompletion,
    ) -> Result<u32> {
        check_row(row)?;
        if !completion.completes(pulse_fraction) {
            return Ok(0);
        }
        let r = &mut self.rows[row as usize];
        let mut flips = 0;
        for w in 0..WORDS_PER_ROW {
            let old = r[w];
            let m = self.active.0[w];
            r[w] = (old & !m) | (buf.bits[w] & m);
            flips += (old ^ r[w]).count_ones();
        }
        Ok(flips)
    }

    /// Row-major snapshot: 128 bytes per row, column `c` at bit `c % 8` of
    /// byte `c / 8`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(TILE_ROWS * TILE_COLS / 8);
        for row in self.rows.iter() {
            for w in row {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(variant: CellVariant, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != TILE_ROWS * TILE_COLS / 8 {
            return Err(Error::Io(format!(
                "tile snapshot must be {} bytes, got {}",
                TILE_ROWS * TILE_COLS / 8,
                bytes.len()
            )));
        }
        let mut t = Tile::new(variant);
        for (i, chunk) in bytes.chunks_exact(8).enumerate() {
            t.rows[i / WORDS_PER_ROW][i % WORDS_PER_ROW] =
                u64::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(t)
    }

    /// First cell, in row-major order, where the two tiles' cells differ.
    pub fn first_difference(&self, other: &Tile) -> Option<(u16, u16)> {
        for (r, (a, b)) in self.rows.iter().zip(other.rows.iter()).enumerate() {
            for w in 0..WORDS_PER_ROW {
                let d = a[w] ^ b[w];
                if d != 0 {
                    return Some((r as u16, (w * 64) as u16 + d.trailing_zeros() as u16));
                }
            }
        }
        None
    }

    pub fn same_cells(&self, other: &Tile) -> bool {
        self.rows == other.rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{apply_gate_she, apply_gate_stt_with, MtjState};
    use proptest::prelude::*;

    const DET: PulseCompletion = PulseCompletion::Deterministic;

    #[test]
    fn activation_replaces_and_collapses() {
        let mut t = Tile::new(CellVariant::Stt);
        t.activate_columns(&[3, 7]).unwrap();
        assert_eq!(t.active_columns().iter().collect::<Vec<_>>(), vec![3, 7]);
        t.activate_columns(&[3, 3, 3, 3, 3]).unwrap();
        assert_eq!(t.active_columns().iter().collect::<Vec<_>>(), vec![3]);
        let before = t.clone();
        t.activate_columns(&[3, 3, 3, 3, 3]).unwrap();
        assert_eq!(t, before);
        assert!(t.activate_columns(&[1024]).is_err());
        assert!(matches!(t.activate_columns(&[]), Err(Error::ActivationCount(0))));
        assert!(t.activate_columns(&[1, 2, 3, 4, 5, 6]).is_err());
    }

    #[test]
    fn parity_rule_is_enforced_at_construction() {
        assert!(RowTriple::binary(2, 4, 5).is_ok());
        assert!(matches!(RowTriple::binary(2, 3, 5), Err(Error::Parity { .. })));
        assert!(RowTriple::binary(2, 4, 6).is_err());
        assert!(RowTriple::unary(1, 2).is_ok());
        assert!(RowTriple::unary(1, 3).is_err());
        assert!(RowTriple::binary(0, 2, 1025).is_err());
    }

    #[test]
    fn nand_per_column() {
        let mut t = Tile::new(CellVariant::Stt);
        t.set(0, 0, false);
        t.set(2, 0, true);
        t.set(0, 1, true);
        t.set(2, 1, true);
        t.activate_columns(&[0, 1]).unwrap();
        t.logic_op(GateKind::Nand, RowTriple::binary(0, 2, 1).unwrap(), 1.0, DET)
            .unwrap();
        assert!(t.get(1, 0));
        assert!(!t.get(1, 1));
    }

    #[test]
    fn no_active_columns_changes_nothing() {
        let mut t = Tile::new(CellVariant::Stt);
        let before = t.clone();
        t.logic_op(GateKind::Nand, RowTriple::binary(0, 2, 1).unwrap(), 1.0, DET)
            .unwrap();
        t.write_bit(5, true, 1.0, DET).unwrap();
        assert_eq!(t, before);
    }

    #[test]
    fn interrupted_then_repeated_equals_single() {
        let mut t = Tile::new(CellVariant::Stt);
        t.set(0, 4, false);
        t.set(2, 4, true);
        t.activate_range(0, 7).unwrap();
        t.write_bit(1, true, 1.0, DET).unwrap();
        let rows = RowTriple::binary(0, 2, 1).unwrap();
        let mut once = t.clone();
        once.logic_op(GateKind::And, rows, 1.0, DET).unwrap();
        t.logic_op(GateKind::And, rows, 0.4, DET).unwrap();
        t.logic_op(GateKind::And, rows, 1.0, DET).unwrap();
        assert_eq!(t, once);
    }

    #[test]
    fn write_bit_is_masked_and_idempotent() {
        let mut t = Tile::new(CellVariant::Stt);
        t.activate_columns(&[2]).unwrap();
        t.write_bit(5, true, 1.0, DET).unwrap();
        assert!(t.get(5, 2));
        assert!(!t.get(5, 3));
        let snap = t.clone();
        assert_eq!(t.write_bit(5, true, 1.0, DET).unwrap(), 0);
        assert_eq!(t, snap);
        t.write_bit(5, false, 1.0, DET).unwrap();
        assert!(!t.get(5, 2));
    }

    #[test]
    fn rows_round_trip_through_buffer() {
        let mut t = Tile::new(CellVariant::Stt);
        for c in (0..1024).step_by(3) {
            t.set(9, c, true);
        }
        let buf = t.read_row(9).unwrap();
        let before = t.clone();
        let _ = t.read_row(9).unwrap();
        assert_eq!(t, before);

        t.activate_range(0, 1023).unwrap();
        t.write_row(11, &buf, 1.0, DET).unwrap();
        assert_eq!(t.read_row(11).unwrap(), buf);

        t.activate_columns(&[0]).unwrap();
        let mut ones = RowBuffer::default();
        ones.bits = [u64::MAX; WORDS_PER_ROW];
        t.write_row(12, &ones, 1.0, DET).unwrap();
        assert!(t.get(12, 0));
        assert_eq!(t.read_row(12).unwrap().bits.iter().map(|w| w.count_ones()).sum::<u32>(), 1);
    }

    #[test]
    fn snapshot_round_trip() {
        let mut t = Tile::new(CellVariant::She);
        t.set(1023, 1023, true);
        t.set(0, 5, true);
        let bytes = t.to_bytes();
        assert_eq!(bytes.len(), 128 * 1024);
        assert_eq!(bytes[5 / 8], 1 << 5);
        let back = Tile::from_bytes(CellVariant::She, &bytes).unwrap();
        assert!(back.same_cells(&t));
        let mut other = back.clone();
        other.set(7, 9, true);
        assert_eq!(t.first_difference(&other), Some((7, 9)));
    }

    #[test]
    fn strict_mode_reports_bad_preset() {
        let mut t = Tile::new(CellVariant::Stt);
        t.strict_presets = true;
        t.activate_columns(&[4]).unwrap();
        t.set(1, 4, true);
        let err = t
            .logic_op(GateKind::Nand, RowTriple::binary(0, 2, 1).unwrap(), 1.0, DET)
            .unwrap_err();
        assert!(matches!(err, Error::Preset { row: 1, col: 4, preset: 0, .. }));
    }

    fn arb_gate() -> impl Strategy<Value = GateKind> {
        prop::sample::select(GateKind::ALL.to_vec())
    }

    proptest! {
        // Word-wide op agrees with per-cell device semantics, and inactive
        // columns are untouched.
        #[test]
        fn word_op_matches_cell_semantics(
            gate in arb_gate(),
            she in any::<bool>(),
            a in prop::array::uniform16(any::<u64>()),
            b in prop::array::uniform16(any::<u64>()),
            o in prop::array::uniform16(any::<u64>()),
            act in prop::array::uniform16(any::<u64>()),
            frac in prop::sample::select(vec![0.0, 0.25, 0.5, 0.75, 1.0]),
        ) {
            let variant = if she { CellVariant::She } else { CellVariant::Stt };
            let mut t = Tile::new(variant);
            t.rows[0] = a;
            t.rows[2] = b;
            t.rows[1] = o;
            t.set_active(ColumnMask(act));
            let before = t.clone();
            let rows = if gate.arity() == 1 {
                RowTriple::unary(0, 1).unwrap()
            } else {
                RowTriple::binary(0, 2, 1).unwrap()
            };
            t.logic_op(gate, rows, frac, DET).unwrap();
            for c in 0..1024u16 {
                let ins: Vec<MtjState> = if gate.arity() == 1 {
                    vec![MtjState::from_bit(before.get(0, c))]
                } else {
                    vec![MtjState::from_bit(before.get(0, c)), MtjState::from_bit(before.get(2, c))]
                };
                let prev = MtjState::from_bit(before.get(1, c));
                let expect = if !before.active.contains(c) {
                    prev
                } else if she {
                    if frac >= 1.0 { apply_gate_she(&ins, prev, gate).unwrap() } else { prev }
                } else {
                    apply_gate_stt_with(&ins, prev, gate, frac, DET).unwrap()
                };
                prop_assert_eq!(t.get(1, c), expect.bit());
            }
            for r in [0u16, 2] {
                prop_assert_eq!(t.row(r), before.row(r));
            }
            // Re-execution is a no-op.
            let again = t.clone();
            t.logic_op(gate, rows, 1.0, DET).unwrap();
            if frac >= 1.0 {
                prop_assert_eq!(&t, &again);
            }
        }
    }
}
