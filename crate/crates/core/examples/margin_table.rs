//! Drive-voltage windows for every gate on each device preset, and how the
//! relative margin shrinks as access-transistor resistance grows.

use spinpim::device::{solve_drive_voltage, DeviceParams, GateKind};

fn main() -> spinpim::Result<()> {
    for name in ["modern_stt", "future_stt", "future_she"] {
        let p = DeviceParams::preset(name)?;
        println!("{name}");
        for kind in GateKind::ALL {
            let w = solve_drive_voltage(kind, &p)?;
            println!(
                "  {:5} [{:.1}, {:.1}) mV{}",
                kind.name(),
                w.v_min * 1e3,
                w.v_max * 1e3,
                if w.feasible { "" } else { "  infeasible" }
            );
        }
    }
    println!("future_stt NAND vs transistor resistance");
    for r in [0.0, 1e3, 5e3, 20e3, 100e3] {
        let p = DeviceParams::future_stt().with_transistor(r);
        let w = solve_drive_voltage(GateKind::Nand, &p)?;
        // Series resistance shifts both edges equally, so the width holds
        // while the margin relative to the drive level shrinks.
        println!(
            "  {:>7.0} ohm  width {:.1} mV  relative {:.1}%",
            r,
            (w.v_max - w.v_min) * 1e3,
            100.0 * (w.v_max - w.v_min) / w.midpoint()
        );
    }
    Ok(())
}
