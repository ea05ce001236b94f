//! Compiles the same kernels for both cell variants and compares instruction
//! counts, latency and energy.

use spinpim::compiler::{lower_add, lower_fulladd, lower_mult, Program};
use spinpim::controller::{Machine, MachineConfig};
use spinpim::device::{CellVariant, DeviceParams};
use spinpim::power::PowerTrace;

fn cost(p: &Program, params: DeviceParams) -> spinpim::Result<(f64, f64)> {
    let mut m = Machine::from_program(MachineConfig::with_params(params), &p.instructions)?;
    let l = m.run(&PowerTrace::continuous(), None)?;
    Ok((l.total_t * 1e6, l.total_e * 1e6))
}

fn main() -> spinpim::Result<()> {
    type Lower = fn(CellVariant) -> spinpim::Result<Program>;
    let kernels: [(&str, Lower); 3] = [
        ("full adder", |t| lower_fulladd(1024, t)),
        ("add 16", |t| lower_add(16, 1024, t)),
        ("mult 8", |t| lower_mult(8, 1024, t)),
    ];
    println!("kernel,stt_instr,she_instr,stt_us,she_us,stt_uj,she_uj");
    for (name, lower) in kernels {
        let stt = lower(CellVariant::Stt)?;
        let she = lower(CellVariant::She)?;
        let (ts, es) = cost(&stt, DeviceParams::future_stt())?;
        let (th, eh) = cost(&she, DeviceParams::future_she())?;
        println!(
            "{name},{},{},{ts:.3},{th:.3},{es:.5},{eh:.5}",
            stt.len(),
            she.len()
        );
    }
    Ok(())
}
