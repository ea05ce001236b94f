//! Quantize the ADULT model, compile it, and classify held-out samples on
//! the simulated array, checking every score against the integer oracle.
//!
//!     cargo run --example svm_inference -- [samples] [stt|she]

use std::path::Path;
use std::time::Instant;

use spinpim::compiler::{codegen_svm, SvmCodegenConfig};
use spinpim::controller::MachineConfig;
use spinpim::device::{CellVariant, DeviceParams};
use spinpim::power::PowerTrace;
use spinpim::svmlab::{argmax, oracle_infer, quantize, Dataset, QuantWidths, SvmModel};

fn main() -> spinpim::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let (target, params) = match args.next().as_deref() {
        Some("she") => (CellVariant::She, DeviceParams::future_she()),
        _ => (CellVariant::Stt, DeviceParams::future_stt()),
    };

    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let model = SvmModel::load(data.join("adult_model.txt"))?;
    let test = Dataset::load(data.join("adult_test.csv"))?;
    let q = quantize(&model, QuantWidths::default())?;
    let prog = codegen_svm(&q, &SvmCodegenConfig { target, ..Default::default() })?;
    let w = q.widths();
    println!(
        "{} SVs, shift {}, c0 {}, widths dot/t/alpha/term = {}/{}/{}/{}",
        q.n_svs(), q.shift, q.c0_q, w.dot, w.t, w.alpha, w.term
    );
    println!("{} instructions: {:?}", prog.program.len(), prog.program.counts());

    let mut hits = 0;
    let started = Instant::now();
    for (x, &y) in test.samples.iter().zip(&test.labels).take(n) {
        let mut m = prog.machine(MachineConfig::with_params(params), x)?;
        let l = m.run(&PowerTrace::continuous(), None)?;
        let got = m.scores().expect("reduction finished");
        let (want, _) = oracle_infer(&q, x)?;
        assert_eq!(got, want, "simulator and oracle disagree");
        let k = argmax(&got);
        hits += (k == y) as usize;
        println!(
            "label {y} predicted {k} scores {got:?} time {:.1} us energy {:.3} uJ",
            l.total_t * 1e6,
            l.total_e * 1e6
        );
    }
    let n = n.min(test.len());
    println!(
        "accuracy {}/{} in {:.2?}",
        hits,
        n,
        started.elapsed()
    );
    Ok(())
}
