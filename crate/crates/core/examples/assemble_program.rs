//! Assembles a short hand-written program, encodes it to 64-bit words, decodes
//! it back and runs it on one tile.
//!
//!     cargo run --example assemble_program

use spinpim::controller::{Machine, MachineConfig};
use spinpim::isa::{assemble, decode_program, disassemble, encode_program};
use spinpim::power::PowerTrace;

const SOURCE: &str = "\
# XOR of rows 0 and 2 into row 7 across columns 0..=3.
# NAND presets its output to 0, COPY to 1. Gate inputs share a row
# parity and the output takes the other one.
ACTRANGE 0 0 3
SET0 0 1
NAND 0 0 2 1
SET1 0 3
COPY 0 0 3
SET1 0 5
COPY 0 2 5
SET0 0 4
NAND 0 3 1 4
SET0 0 6
NAND 0 5 1 6
SET0 0 7
NAND 0 4 6 7
HALT
";

fn main() -> spinpim::Result<()> {
    let prog = assemble(SOURCE)?;
    let words = encode_program(&prog);
    for (i, w) in words.iter().enumerate() {
        println!("{i:3}  {w:016x}");
    }
    let back = decode_program(&words)?;
    assert_eq!(back, prog);
    print!("{}", disassemble(&back));

    let mut m = Machine::from_program(MachineConfig::default(), &prog)?;
    for c in 0..4u16 {
        m.tile_mut(0).set(0, c, c & 1 == 1);
        m.tile_mut(0).set(2, c, c & 2 == 2);
    }
    let l = m.run(&PowerTrace::continuous(), None)?;
    let t = m.tile(0).expect("tile 0 was used");
    for c in 0..4u16 {
        println!("{} ^ {} = {}", t.get(0, c) as u8, t.get(2, c) as u8, t.get(7, c) as u8);
    }
    println!("{} instructions, {:.3} us", l.instructions, l.total_t * 1e6);
    Ok(())
}
