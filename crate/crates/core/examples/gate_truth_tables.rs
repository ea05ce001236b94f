//! Prints every gate's truth table as evaluated by the STT threshold model
//! (from its preset) and the SHE assignment model.

use spinpim::device::{apply_gate_she, apply_gate_stt, GateKind, MtjState};

fn main() -> spinpim::Result<()> {
    for kind in GateKind::ALL {
        let spec = kind.spec();
        println!(
            "{kind}: preset {} switches {:?}",
            spec.preset as u8, spec.direction
        );
        for m in 0..1u32 << spec.arity {
            let bits: Vec<bool> = (0..spec.arity).map(|i| m >> i & 1 == 1).collect();
            let ins: Vec<MtjState> = bits.iter().map(|&b| MtjState::from_bit(b)).collect();
            let stt = apply_gate_stt(&ins, MtjState::from_bit(spec.preset), kind, 1.0)?;
            // Any prior output works for SHE; start from the wrong answer.
            let she = apply_gate_she(&ins, MtjState::from_bit(!kind.eval(&bits)), kind)?;
            let shown: Vec<u8> = bits.iter().map(|&b| b as u8).collect();
            println!("  {shown:?} -> stt {} she {}", stt.bit() as u8, she.bit() as u8);
            assert_eq!(stt.bit(), kind.eval(&bits));
            assert_eq!(she.bit(), kind.eval(&bits));
        }
    }
    Ok(())
}
