//! Compiles add, subtract, multiply and binary dot product kernels, runs each
//! over 1024 random lanes and checks them against integer arithmetic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spinpim::array::TILE_COLS;
use spinpim::compiler::{lower_add, lower_binary_dot, lower_mult, lower_sub, Program};
use spinpim::controller::{Machine, MachineConfig};
use spinpim::device::CellVariant;
use spinpim::power::PowerTrace;

fn run(p: &Program, ops: &[(u64, u64)]) -> spinpim::Result<Vec<u64>> {
    let (a, b, r) = (
        p.layout.region("a").expect("fixed layout"),
        p.layout.region("b").expect("fixed layout"),
        p.layout.region("result").expect("fixed layout"),
    );
    let mut m = Machine::from_program(MachineConfig::default(), &p.instructions)?;
    for (c, &(x, y)) in ops.iter().enumerate() {
        m.tile_mut(0).store_uint(c as u16, a, x);
        m.tile_mut(0).store_uint(c as u16, b, y);
    }
    let l = m.run(&PowerTrace::continuous(), None)?;
    println!(
        "  {} instructions, {:.2} us, {:.4} uJ",
        p.len(),
        l.total_t * 1e6,
        l.total_e * 1e6
    );
    let t = m.tile(0).expect("tile 0 was used");
    Ok((0..ops.len()).map(|c| t.load_uint(c as u16, r)).collect())
}

fn main() -> spinpim::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let w = 8;
    let ops: Vec<(u64, u64)> = (0..TILE_COLS)
        .map(|_| (rng.gen_range(0..1 << w), rng.gen_range(0..1 << w)))
        .collect();
    let t = CellVariant::Stt;

    println!("add {w}-bit");
    let got = run(&lower_add(w, TILE_COLS, t)?, &ops)?;
    assert!(ops.iter().zip(&got).all(|(&(a, b), &r)| r == a + b));

    println!("sub {w}-bit (top bit is no-borrow)");
    let got = run(&lower_sub(w, TILE_COLS, t)?, &ops)?;
    let mask = (1 << w) - 1;
    assert!(ops
        .iter()
        .zip(&got)
        .all(|(&(a, b), &r)| r & mask == a.wrapping_sub(b) & mask && (r >> w == 1) == (a >= b)));

    println!("mult {w}-bit");
    let got = run(&lower_mult(w, TILE_COLS, t)?, &ops)?;
    assert!(ops.iter().zip(&got).all(|(&(a, b), &r)| r == a * b));

    println!("binary dot over {w} features");
    let got = run(&lower_binary_dot(w, TILE_COLS, t)?, &ops)?;
    assert!(ops
        .iter()
        .zip(&got)
        .all(|(&(a, b), &r)| r == (a & b).count_ones() as u64));

    println!("all {} lanes match", TILE_COLS);
    Ok(())
}
