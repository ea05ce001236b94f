//! Instruction set, 64-bit binary encoding and the assembly text format.
//!
//! Word layout (bit 63 is the MSB):
//!
//! ```text
//! [63:60] opcode   [59:51] tile
//! logic     [50:41] in1  [40:31] in2 (= in1 for unary)  [30:21] out
//! SET0/SET1 [50:41] row  [40] value
//! READROW / WRITEROW  [50:41] row
//! ACTCOL    five 10-bit columns at [50:41] [40:31] [30:21] [20:11] [10:1]
//! ACTRANGE  [50:41] start  [40:31] end
//! ```
//!
//! Every bit not named above must be zero.

use std::fmt;

use crate::array::{check_tile, RowTriple, MAX_ACTIVATE_COLUMNS, TILE_COLS, TILE_ROWS};
use crate::device::{GateKind, OpClass};
use crate::error::{Error, Result};

pub type Word64 = u64;

pub const OP_READROW: u8 = 0x0;
pub const OP_WRITEROW: u8 = 0x1;
pub const OP_SET0: u8 = 0x2;
pub const OP_SET1: u8 = 0x3;
pub const OP_NOT: u8 = 0x4;
pub const OP_COPY: u8 = 0x5;
pub const OP_AND: u8 = 0x6;
pub const OP_NAND: u8 = 0x7;
pub const OP_OR: u8 = 0x8;
pub const OP_NOR: u8 = 0x9;
pub const OP_ACTCOL: u8 = 0xA;
pub const OP_ACTRANGE: u8 = 0xB;
pub const OP_HALT: u8 = 0xF;

/// The encoding of `Halt`; doubles as the empty stored-activation value.
pub const HALT_WORD: Word64 = (OP_HALT as u64) << 60;

const TILE_SHIFT: u32 = 51;
const F0: u32 = 41;
const F1: u32 = 31;
const F2: u32 = 21;
const F3: u32 = 11;
const F4: u32 = 1;
const COL_SHIFTS: [u32; 5] = [F0, F1, F2, F3, F4];
const MASK10: u64 = 0x3ff;
const MASK9: u64 = 0x1ff;

/// Up to five latched columns in canonical form: strictly ascending.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActCols {
    cols: [u16; MAX_ACTIVATE_COLUMNS],
    len: u8,
}

impl ActCols {
    /// Sorts and deduplicates; 1..=5 distinct columns after that.
    pub fn new(cols: &[u16]) -> Result<Self> {
        let mut v = cols.to_vec();
        v.sort_unstable();
        v.dedup();
        if v.is_empty() || v.len() > MAX_ACTIVATE_COLUMNS {
            return Err(Error::ActivationCount(v.len()));
        }
        if let Some(&c) = v.iter().find(|&&c| c as usize >= TILE_COLS) {
            return Err(Error::OutOfRange {
                what: "column",
                value: c as u64,
                limit: TILE_COLS as u64,
            });
        }
        let mut arr = [0u16; MAX_ACTIVATE_COLUMNS];
        arr[..v.len()].copy_from_slice(&v);
        Ok(ActCols {
            cols: arr,
            len: v.len() as u8,
        })
    }

    pub fn as_slice(&self) -> &[u16] {
        &self.cols[..self.len as usize]
    }

    /// The five encoded fields, padded by repeating the last column.
    pub fn fields(&self) -> [u16; MAX_ACTIVATE_COLUMNS] {
        let mut f = self.cols;
        let last = f[self.len as usize - 1];
        for x in f.iter_mut().skip(self.len as usize) {
            *x = last;
        }
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Instruction {
    Logic {
        kind: GateKind,
        tile: u16,
        rows: RowTriple,
    },
    WriteBit {
        tile: u16,
        row: u16,
        value: bool,
    },
    ReadRow {
        tile: u16,
        row: u16,
    },
    WriteRow {
        tile: u16,
        row: u16,
    },
    ActivateColumns {
        tile: u16,
        cols: ActCols,
    },
    ActivateRange {
        tile: u16,
        start: u16,
        end: u16,
    },
    Halt,
}

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

impl Instruction {
    pub fn logic(kind: GateKind, tile: u16, in1: u16, in2: Option<u16>, out: u16) -> Result<Self> {
        check_tile(tile)?;
        match (kind.arity(), in2) {
            (1, None) | (2, Some(_)) => {}
            (expected, _) => {
                return Err(Error::Arity {
                    gate: kind.name(),
                    expected,
                    got: 1 + in2.is_some() as usize,
                })
            }
        }
        Ok(Instruction::Logic {
            kind,
            tile,
            rows: RowTriple::new(in1, in2, out)?,
        })
    }

    pub fn set(tile: u16, row: u16, value: bool) -> Result<Self> {
        check_tile(tile)?;
        check_row(row)?;
        Ok(Instruction::WriteBit { tile, row, value })
    }

    pub fn read_row(tile: u16, row: u16) -> Result<Self> {
        check_tile(tile)?;
        check_row(row)?;
        Ok(Instruction::ReadRow { tile, row })
    }

    pub fn write_row(tile: u16, row: u16) -> Result<Self> {
        check_tile(tile)?;
        check_row(row)?;
        Ok(Instruction::WriteRow { tile, row })
    }

    pub fn act_cols(tile: u16, cols: &[u16]) -> Result<Self> {
        check_tile(tile)?;
        Ok(Instruction::ActivateColumns {
            tile,
            cols: ActCols::new(cols)?,
        })
    }

    pub fn act_range(tile: u16, start: u16, end: u16) -> Result<Self> {
        check_tile(tile)?;
        for c in [start, end] {
            if c as usize >= TILE_COLS {
                return Err(Error::OutOfRange {
                    what: "column",
                    value: c as u64,
                    limit: TILE_COLS as u64,
                });
            }
        }
        if start > end {
            return Err(Error::Layout(format!(
                "activate range start {start} exceeds end {end}"
            )));
        }
        Ok(Instruction::ActivateRange { tile, start, end })
    }

    pub fn opcode(&self) -> u8 {
        match self {
            Instruction::Logic { kind, .. } => match kind {
                GateKind::Not => OP_NOT,
                GateKind::Copy => OP_COPY,
                GateKind::And => OP_AND,
                GateKind::Nand => OP_NAND,
                GateKind::Or => OP_OR,
                GateKind::Nor => OP_NOR,
            },
            Instruction::WriteBit { value: false, .. } => OP_SET0,
            Instruction::WriteBit { value: true, .. } => OP_SET1,
            Instruction::ReadRow { .. } => OP_READROW,
            Instruction::WriteRow { .. } => OP_WRITEROW,
            Instruction::ActivateColumns { .. } => OP_ACTCOL,
            Instruction::ActivateRange { .. } => OP_ACTRANGE,
            Instruction::Halt => OP_HALT,
        }
    }

    pub fn mnemonic(&self) -> &'static str {
        mnemonic_of(self.opcode()).expect("assigned opcode")
    }

    pub fn tile(&self) -> Option<u16> {
        match *self {
            Instruction::Logic { tile, .. }
            | Instruction::WriteBit { tile, .. }
            | Instruction::ReadRow { tile, .. }
            | Instruction::WriteRow { tile, .. }
            | Instruction::ActivateColumns { tile, .. }
            | Instruction::ActivateRange { tile, .. } => Some(tile),
            Instruction::Halt => None,
        }
    }

    pub fn is_activation(&self) -> bool {
        matches!(
            self,
            Instruction::ActivateColumns { .. } | Instruction::ActivateRange { .. }
        )
    }

    /// Cost class of the array operation; `None` for `Halt`.
    pub fn op_class(&self) -> Option<OpClass> {
        Some(match self {
            Instruction::Logic { kind, .. } => OpClass::Logic(*kind),
            Instruction::WriteBit { .. } => OpClass::WriteBit,
            Instruction::ReadRow { .. } => OpClass::ReadRow,
            Instruction::WriteRow { .. } => OpClass::WriteRow,
            Instruction::ActivateColumns { cols, .. } => OpClass::Activate(cols.len as u16),
            Instruction::ActivateRange { .. } => OpClass::Activate(2),
            Instruction::Halt => return None,
        })
    }
}

pub fn mnemonic_of(opcode: u8) -> Option<&'static str> {
    Some(match opcode {
        OP_READROW => "READROW",
        OP_WRITEROW => "WRITEROW",
        OP_SET0 => "SET0",
        OP_SET1 => "SET1",
        OP_NOT => "NOT",
        OP_COPY => "COPY",
        OP_AND => "AND",
        OP_NAND => "NAND",
        OP_OR => "OR",
        OP_NOR => "NOR",
        OP_ACTCOL => "ACTCOL",
        OP_ACTRANGE => "ACTRANGE",
        OP_HALT => "HALT",
        _ => return None,
    })
}

fn gate_of(opcode: u8) -> Option<GateKind> {
    Some(match opcode {
        OP_NOT => GateKind::Not,
        OP_COPY => GateKind::Copy,
        OP_AND => GateKind::And,
        OP_NAND => GateKind::Nand,
        OP_OR => GateKind::Or,
        OP_NOR => GateKind::Nor,
        _ => return None,
    })
}

pub fn encode(instr: &Instruction) -> Word64 {
    let op = (instr.opcode() as u64) << 60;
    let tile = |t: u16| (t as u64) << TILE_SHIFT;
    let f = |v: u16, shift: u32| (v as u64) << shift;
    match *instr {
        Instruction::Logic { tile: t, rows, .. } => {
            op | tile(t) | f(rows.in1(), F0) | f(rows.in2_or_mirror(), F1) | f(rows.out(), F2)
        }
        Instruction::WriteBit { tile: t, row, value } => {
            op | tile(t) | f(row, F0) | (value as u64) << 40
        }
        Instruction::ReadRow { tile: t, row } | Instruction::WriteRow { tile: t, row } => {
            op | tile(t) | f(row, F0)
        }
        Instruction::ActivateColumns { tile: t, cols } => cols
            .fields()
            .iter()
            .zip(COL_SHIFTS)
            .fold(op | tile(t), |w, (&c, s)| w | f(c, s)),
        Instruction::ActivateRange { tile: t, start, end } => {
            op | tile(t) | f(start, F0) | f(end, F1)
        }
        Instruction::Halt => op,
    }
}

pub fn decode(word: Word64) -> Result<Instruction> {
    let opcode = (word >> 60) as u8;
    let tile = ((word >> TILE_SHIFT) & MASK9) as u16;
    let field = |s: u32| ((word >> s) & MASK10) as u16;
    let low_zero = |below: u32| word & ((1u64 << below) - 1) == 0;
    let bad = |why: &'static str| Error::Decode(word, why);

    if let Some(kind) = gate_of(opcode) {
        if !low_zero(F2) {
            return Err(bad("reserved bits set in logic instruction"));
        }
        let (in1, in2, out) = (field(F0), field(F1), field(F2));
        let in2 = if kind.arity() == 1 {
            if in2 != in1 {
                return Err(bad("unary gate must mirror in1 into in2"));
            }
            None
        } else {
            Some(in2)
        };
        let rows = RowTriple::new(in1, in2, out).map_err(|_| bad("row parity violation"))?;
        return Ok(Instruction::Logic { kind, tile, rows });
    }
    match opcode {
        OP_SET0 | OP_SET1 => {
            if !low_zero(40) {
                return Err(bad("reserved bits set in write instruction"));
            }
            let value = (word >> 40) & 1 == 1;
            if value != (opcode == OP_SET1) {
                return Err(bad("value bit disagrees with opcode"));
            }
            Ok(Instruction::WriteBit {
                tile,
                row: field(F0),
                value,
            })
        }
        OP_READROW | OP_WRITEROW => {
            if !low_zero(F0) {
                return Err(bad("reserved bits set in memory instruction"));
            }
            let row = field(F0);
            Ok(if opcode == OP_READROW {
                Instruction::ReadRow { tile, row }
            } else {
                Instruction::WriteRow { tile, row }
            })
        }
        OP_ACTCOL => {
            if word & 1 != 0 {
                return Err(bad("reserved bit 0 set in ACTCOL"));
            }
            let f: Vec<u16> = COL_SHIFTS.iter().map(|&s| field(s)).collect();
            let cols = ActCols::new(&f).map_err(|_| bad("bad column list"))?;
            if cols.fields().as_slice() != f.as_slice() {
                return Err(bad("ACTCOL columns not in canonical order"));
            }
            Ok(Instruction::ActivateColumns { tile, cols })
        }
        OP_ACTRANGE => {
            if !low_zero(F1) {
                return Err(bad("reserved bits set in ACTRANGE"));
            }
            let (start, end) = (field(F0), field(F1));
            if start > end {
                return Err(bad("ACTRANGE start exceeds end"));
            }
            Ok(Instruction::ActivateRange { tile, start, end })
        }
        OP_HALT => {
            if word != HALT_WORD {
                return Err(bad("reserved bits set in HALT"));
            }
            Ok(Instruction::Halt)
        }
        _ => Err(bad("reserved opcode")),
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.mnemonic();
        match *self {
            Instruction::Logic { tile, rows, .. } => match rows.in2() {
                Some(in2) => write!(f, "{m} {tile} {} {in2} {}", rows.in1(), rows.out()),
                None => write!(f, "{m} {tile} {} {}", rows.in1(), rows.out()),
            },
            Instruction::WriteBit { tile, row, .. }
            | Instruction::ReadRow { tile, row }
            | Instruction::WriteRow { tile, row } => write!(f, "{m} {tile} {row}"),
            Instruction::ActivateColumns { tile, cols } => {
                write!(f, "{m} {tile}")?;
                for c in cols.as_slice() {
                    write!(f, " {c}")?;
                }
                Ok(())
            }
            Instruction::ActivateRange { tile, start, end } => write!(f, "{m} {tile} {start} {end}"),
            Instruction::Halt => write!(f, "{m}"),
        }
    }
}

/// Parses one line; `Ok(None)` for blank or comment-only lines.
pub fn parse_line(line: &str, line_no: usize) -> Result<Option<Instruction>> {
    let code = line.split('#').next().unwrap_or("");
    let mut tokens: Vec<(usize, &str)> = Vec::new();
    let mut start = None;
    for (i, ch) in code.char_indices() {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                tokens.push((s, &code[s..i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        tokens.push((s, &code[s..]));
    }
    let Some(&(mcol, mnem)) = tokens.first() else {
        return Ok(None);
    };
    let err = |col: usize, message: String| Error::Assembly {
        line: line_no,
        column: col + 1,
        message,
    };
    let upper = mnem.to_ascii_uppercase();
    let args = &tokens[1..];
    let mut nums = Vec::with_capacity(args.len());
    for &(c, t) in args {
        nums.push(
            t.parse::<u16>()
                .map_err(|_| err(c, format!("expected a number, found `{t}`")))?,
        );
    }
    let arity = |want: std::ops::RangeInclusive<usize>| -> Result<()> {
        if want.contains(&nums.len()) {
            Ok(())
        } else {
            let (lo, hi) = (want.start(), want.end());
            let expected = if lo == hi {
                format!("{lo}")
            } else {
                format!("{lo} to {hi}")
            };
            Err(err(
                mcol,
                format!("{upper} takes {expected} operand(s), got {}", nums.len()),
            ))
        }
    };
    let at = |e: Error| err(mcol, e.to_string());
    let instr = match upper.as_str() {
        "HALT" => {
            arity(0..=0)?;
            Instruction::Halt
        }
        "SET0" | "SET1" => {
            arity(2..=2)?;
            Instruction::set(nums[0], nums[1], upper == "SET1").map_err(at)?
        }
        "READROW" => {
            arity(2..=2)?;
            Instruction::read_row(nums[0], nums[1]).map_err(at)?
        }
        "WRITEROW" => {
            arity(2..=2)?;
            Instruction::write_row(nums[0], nums[1]).map_err(at)?
        }
        "ACTCOL" => {
            arity(2..=1 + MAX_ACTIVATE_COLUMNS)?;
            Instruction::act_cols(nums[0], &nums[1..]).map_err(at)?
        }
        "ACTRANGE" => {
            arity(3..=3)?;
            Instruction::act_range(nums[0], nums[1], nums[2]).map_err(at)?
        }
        other => {
            let kind: GateKind = other
                .parse()
                .map_err(|_| err(mcol, format!("unknown mnemonic `{mnem}`")))?;
            if kind.arity() == 1 {
                arity(3..=3)?;
                Instruction::logic(kind, nums[0], nums[1], None, nums[2]).map_err(at)?
            } else {
                arity(4..=4)?;
                Instruction::logic(kind, nums[0], nums[1], Some(nums[2]), nums[3]).map_err(at)?
            }
        }
    };
    Ok(Some(instr))
}

pub fn assemble(text: &str) -> Result<Vec<Instruction>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(instr) = parse_line(line, i + 1)? {
            out.push(instr);
        }
    }
    Ok(out)
}

pub fn disassemble(program: &[Instruction]) -> String {
    let mut s = String::new();
    for i in program {
        s.push_str(&i.to_string());
        s.push('\n');
    }
    s
}

pub fn encode_program(program: &[Instruction]) -> Vec<Word64> {
    program.iter().map(encode).collect()
}

pub fn decode_program(words: &[Word64]) -> Result<Vec<Instruction>> {
    words.iter().map(|&w| decode(w)).collect()
}

/// Little-endian byte image of a program.
pub fn words_to_bytes(words: &[Word64]) -> Vec<u8> {
    words.iter().flat_map(|w| w.to_le_bytes()).collect()
}

pub fn bytes_to_words(bytes: &[u8]) -> Result<Vec<Word64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Io(format!(
            "program image length {} is not a multiple of 8",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

#[cfg(test)]
pub(crate) mod strategies {
    use super::*;
    use proptest::prelude::*;

    pub fn arb_instruction() -> impl Strategy<Value = Instruction> {
        let tile = 0u16..512;
        let row = 0u16..1024;
        let col = 0u16..1024;
        prop_oneof![
            (prop::sample::select(GateKind::ALL.to_vec()), tile.clone(), 0u16..512, 0u16..512, 0u16..512, any::<bool>())
                .prop_map(|(k, t, a, b, o, p)| {
                    let par = p as u16;
                    let (in1, in2, out) = (a * 2 + par, b * 2 + par, o * 2 + 1 - par);
                    let in2 = (k.arity() == 2).then_some(in2);
                    Instruction::logic(k, t, in1, in2, out).unwrap()
                }),
            (tile.clone(), row.clone(), any::<bool>()).prop_map(|(t, r, v)| Instruction::set(t, r, v).unwrap()),
            (tile.clone(), row.clone()).prop_map(|(t, r)| Instruction::read_row(t, r).unwrap()),
            (tile.clone(), row).prop_map(|(t, r)| Instruction::write_row(t, r).unwrap()),
            (tile.clone(), prop::collection::vec(col.clone(), 1..=5))
                .prop_map(|(t, c)| Instruction::act_cols(t, &c).unwrap()),
            (tile, col.clone(), col).prop_map(|(t, a, b)| Instruction::act_range(t, a.min(b), a.max(b)).unwrap()),
            Just(Instruction::Halt),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::strategies::arb_instruction;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nand_hand_packed() {
        let i = Instruction::logic(GateKind::Nand, 3, 2, Some(4), 5).unwrap();
        let want = (0x7u64 << 60) | (3 << 51) | (2 << 41) | (4 << 31) | (5 << 21);
        assert_eq!(encode(&i), want);
        assert_eq!(decode(want).unwrap(), i);
    }

    #[test]
    fn single_column_padding() {
        let i = Instruction::act_cols(0, &[9]).unwrap();
        let w = encode(&i);
        for s in COL_SHIFTS {
            assert_eq!((w >> s) & MASK10, 9);
        }
        assert_eq!(w >> 60, 0xA);
    }

    #[test]
    fn reserved_opcodes_rejected() {
        for op in 0xCu64..=0xE {
            assert!(decode(op << 60).is_err());
        }
        assert!(decode(HALT_WORD | 1).is_err());
    }

    #[test]
    fn non_canonical_actcol_rejected() {
        let mut w = (OP_ACTCOL as u64) << 60;
        for (c, s) in [5u64, 3, 3, 3, 3].iter().zip(COL_SHIFTS) {
            w |= c << s;
        }
        assert!(decode(w).is_err());
    }

    #[test]
    fn assembly_examples() {
        let p = assemble("NAND 3 2 4 5\n").unwrap();
        assert_eq!(
            p[0],
            Instruction::logic(GateKind::Nand, 3, 2, Some(4), 5).unwrap()
        );
        let e = assemble("# header\n\nNAND 3 2 3 5").unwrap_err();
        assert!(matches!(e, Error::Assembly { line: 3, column: 1, .. }), "{e}");
        assert!(e.to_string().contains("parity"));
        let e = assemble("  FOO 1 2").unwrap_err();
        assert!(matches!(e, Error::Assembly { line: 1, column: 3, .. }));
        let e = assemble("NOT 0 1 2 3").unwrap_err();
        assert!(e.to_string().contains("takes 3"));
        let e = assemble("SET0 0 x").unwrap_err();
        assert!(matches!(e, Error::Assembly { column: 8, .. }));
    }

    #[test]
    fn listing_round_trip() {
        let text = "ACTCOL 0 1 2 3\nSET0 0 1\nnand 0 0 2 1   # c\nNOT 0 1 2\nACTRANGE 1 0 1023\nREADROW 0 4\nWRITEROW 1 4\nHALT\n";
        let p = assemble(text).unwrap();
        let back = assemble(&disassemble(&p)).unwrap();
        assert_eq!(p, back);
        assert!(disassemble(&p).starts_with("ACTCOL 0 1 2 3\nSET0 0 1\nNAND 0 0 2 1\n"));
    }

    #[test]
    fn binary_image_round_trip() {
        let p = assemble("SET1 2 7\nHALT").unwrap();
        let bytes = words_to_bytes(&encode_program(&p));
        assert_eq!(bytes.len(), 16);
        assert_eq!(bytes[15], 0xF0);
        assert_eq!(decode_program(&bytes_to_words(&bytes).unwrap()).unwrap(), p);
        assert!(bytes_to_words(&bytes[..5]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn encode_decode_identity(i in arb_instruction()) {
            prop_assert_eq!(decode(encode(&i)).unwrap(), i);
            let text = i.to_string();
            prop_assert_eq!(parse_line(&text, 1).unwrap().unwrap(), i);
        }

        // Accepted words re-encode to themselves, so no two words share an
        // instruction.
        #[test]
        fn decode_is_injective(w in any::<u64>()) {
            if let Ok(i) = decode(w) {
                prop_assert_eq!(encode(&i), w);
            }
        }
    }
}
