//! Runs an 8-bit multiplier under square-wave power at several duty cycles
//! and prints the time and energy breakdown as CSV.
//!
//!     cargo run --example duty_cycle_sweep -- [frequency_hz]

use spinpim::compiler::lower_mult;
use spinpim::controller::{Machine, MachineConfig};
use spinpim::device::{CellVariant, DeviceParams};
use spinpim::metrics::{report, ReportFormat, ReportRow};
use spinpim::power::{PowerTrace, DEFAULT_FREQUENCY_HZ};

fn main() -> spinpim::Result<()> {
    let freq: f64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_FREQUENCY_HZ);
    let p = lower_mult(8, 1024, CellVariant::Stt)?;
    let base = Machine::from_program(
        MachineConfig::with_params(DeviceParams::future_stt()),
        &p.instructions,
    )?;
    let mut rows = Vec::new();
    for duty in [1.0, 0.5, 0.25, 0.1, 0.05, 0.01] {
        let trace = if duty >= 1.0 {
            PowerTrace::continuous()
        } else {
            PowerTrace::square(freq, duty)?
        };
        let l = base.clone().run(&trace, None)?;
        eprintln!("duty {duty}: {} restarts", l.restarts);
        rows.push(ReportRow::new(duty, &l));
    }
    print!("{}", report(&rows, ReportFormat::Csv));
    Ok(())
}
