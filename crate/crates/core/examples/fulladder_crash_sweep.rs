//! Cuts power at every phase of every instruction of a compiled full adder
//! and checks that each interrupted run ends with the same cells as an
//! uninterrupted one.
//!
//!     cargo run --example fulladder_crash_sweep -- [stt|she]

use spinpim::compiler::lower_fulladd;
use spinpim::controller::{crash_sweep, cut_points, Granularity, Machine, MachineConfig};
use spinpim::device::{CellVariant, DeviceParams};
use spinpim::power::PowerTrace;

fn main() -> spinpim::Result<()> {
    let (target, params) = match std::env::args().nth(1).as_deref() {
        Some("she") => (CellVariant::She, DeviceParams::future_she()),
        _ => (CellVariant::Stt, DeviceParams::future_stt()),
    };
    let p = lower_fulladd(8, target)?;
    let mut m = Machine::from_program(MachineConfig::with_params(params), &p.instructions)?;
    let (a, b, cin) = (
        p.layout.region("a").expect("fixed layout")[0],
        p.layout.region("b").expect("fixed layout")[0],
        p.layout.region("cin").expect("fixed layout")[0],
    );
    for c in 0..8u16 {
        let t = m.tile_mut(0);
        t.set(a, c, c & 1 == 1);
        t.set(b, c, c & 2 == 2);
        t.set(cin, c, c & 4 == 4);
    }
    println!("{} instructions: {:?}", p.len(), p.counts());

    let cuts = cut_points(&m, Granularity::Full);
    let rep = crash_sweep(&m, &PowerTrace::continuous(), &cuts)?;
    let worst = rep.outcomes.iter().map(|o| o.re_executed).max().unwrap_or(0);
    println!(
        "{}/{} cuts consistent, at most {} instruction(s) re-executed",
        rep.passed(),
        rep.outcomes.len(),
        worst
    );
    if let Some(f) = rep.first_failure() {
        println!("first failure: {} {:?}", f.cut, f.divergence);
    }
    Ok(())
}
