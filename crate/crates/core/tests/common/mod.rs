#![allow(dead_code)]

use std::path::PathBuf;

use spinpim::compiler::Program;
use spinpim::controller::{Machine, MachineConfig};
use spinpim::device::{CellVariant, DeviceParams};
use spinpim::svmlab::{quantize, Dataset, QuantWidths, QuantizedModel, SvmModel};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn adult() -> (SvmModel, QuantizedModel, Dataset) {
    let model = SvmModel::load(data_dir().join("adult_model.txt")).unwrap();
    let q = quantize(&model, QuantWidths::default()).unwrap();
    let test = Dataset::load(data_dir().join("adult_test.csv")).unwrap();
    (model, q, test)
}

pub fn params_for(target: CellVariant) -> DeviceParams {
    match target {
        CellVariant::Stt => DeviceParams::future_stt(),
        CellVariant::She => DeviceParams::future_she(),
    }
}

pub fn config_for(target: CellVariant) -> MachineConfig {
    MachineConfig {
        strict_presets: target == CellVariant::Stt,
        ..MachineConfig::with_params(params_for(target))
    }
}

pub fn machine(p: &Program) -> Machine {
    Machine::from_program(config_for(p.target), &p.instructions).unwrap()
}

pub fn rows(p: &Program, name: &str) -> Vec<u16> {
    p.layout.region(name).unwrap_or_else(|| panic!("no region {name}")).to_vec()
}

/// Prints one verdict line and fails the test on FAIL.
/// Verdict lines printed so far.
#[allow(dead_code)]
pub static VERDICTS: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);

pub fn verdict(id: &str, what: &str, pass: bool, detail: impl std::fmt::Display) {
    let v = if pass { "PASS" } else { "FAIL" };
    println!("{id} {what}: {v} ({detail})");
    VERDICTS.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
    assert!(pass, "{id} {what}: {detail}");
}
