//! End-to-end runs of the `spinpim` binary.

use std::path::Path;
use std::process::{Command, Output};

use spinpim::compiler::{lower_fulladd, lower_mult};
use spinpim::device::CellVariant;
use spinpim::isa::disassemble;
use spinpim::svmlab::{ClassModel, SupportVector, SvmModel};

fn spinpim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinpim"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

/// Columns of a CSV report after the header.
fn csv_rows(out: &str) -> Vec<Vec<f64>> {
    out.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn write_fulladd(dir: &Path, target: CellVariant) -> &'static str {
    let p = lower_fulladd(64, target).unwrap();
    std::fs::write(dir.join("fa.s"), disassemble(&p.instructions)).unwrap();
    "fa.s"
}

#[test]
fn run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    write_fulladd(dir.path(), CellVariant::Stt);
    std::fs::write(
        dir.path().join("run.toml"),
        "device = \"future_stt\"\nprogram = \"fa.s\"\n[trace]\nduty = 0.25\n",
    )
    .unwrap();
    let a = spinpim(dir.path(), &["run", "--config", "run.toml"]);
    let b = spinpim(dir.path(), &["run", "--config", "run.toml"]);
    assert!(a.status.success(), "{}", text(&a.stderr));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
    let j1 = spinpim(dir.path(), &["run", "--config", "run.toml", "--format", "json"]);
    let j2 = spinpim(dir.path(), &["run", "--config", "run.toml", "--format", "json"]);
    assert_eq!(j1.stdout, j2.stdout);
    let v: serde_json::Value = serde_json::from_slice(&j1.stdout).unwrap();
    assert!(v[0]["TotalT"].as_f64().unwrap() > 0.0);
}

#[test]
fn continuous_power_has_no_overheads() {
    let dir = tempfile::tempdir().unwrap();
    let prog = write_fulladd(dir.path(), CellVariant::Stt);
    let out = spinpim(dir.path(), &["run", "--program", prog, "--duty", "1"]);
    assert!(out.status.success());
    let rows = csv_rows(&text(&out.stdout));
    let r = &rows[0];
    assert_eq!(r[0], 1.0);
    assert!(r[1] > 0.0 && r[3] > 0.0);
    // Backup (the PC commit) is paid every instruction regardless.
    assert!(r[4] > 0.0);
    assert_eq!((r[2], r[5], r[6]), (0.0, 0.0, 0.0));
}

#[test]
fn sweep_time_grows_as_duty_falls() {
    let dir = tempfile::tempdir().unwrap();
    let p = lower_mult(8, 64, CellVariant::She).unwrap();
    std::fs::write(dir.path().join("mult.s"), disassemble(&p.instructions)).unwrap();
    let out = spinpim(
        dir.path(),
        &["sweep-duty", "--program", "mult.s", "--device", "future_she", "--duties", "1,0.05,0.02,0.01"],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let rows = csv_rows(&text(&out.stdout));
    assert_eq!(rows.len(), 4);
    for w in rows.windows(2) {
        assert!(w[1][1] > w[0][1], "{rows:?}");
    }
}

#[test]
fn fuzz_crash_passes_on_generated_code() {
    let dir = tempfile::tempdir().unwrap();
    let prog = write_fulladd(dir.path(), CellVariant::Stt);
    let out = spinpim(dir.path(), &["fuzz-crash", "--program", prog, "--granularity", "full"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let report = text(&out.stdout);
    assert!(report.starts_with("Cut,Pass,"));
    assert!(report.lines().skip(1).all(|l| l.contains(",true,")));
}

#[test]
fn fuzz_crash_flags_volatile_dependence() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.s"),
        "ACTRANGE 0 0 3\nSET1 0 0\nREADROW 0 0\nWRITEROW 0 4\nHALT\n",
    )
    .unwrap();
    let out = spinpim(dir.path(), &["fuzz-crash", "--program", "bad.s", "--format", "json"]);
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let bad: Vec<_> = v.as_array().unwrap().iter().filter(|r| r["Pass"] == false).collect();
    assert!(!bad.is_empty());
    assert!(bad.iter().any(|r| r["Divergence"].is_string()));
    assert!(text(&out.stderr).contains("divergent cell"));
}

#[test]
fn margin_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = spinpim(dir.path(), &["margin", "--device", "future_stt"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(text(&ok.stdout).lines().count(), 7);
    std::fs::write(
        dir.path().join("flat.toml"),
        "[device_params]\nr_p = 7340.0\nr_ap = 7340.0\nt_switch = 1e-9\ni_switch = 3e-6\n\
         r_transistor = 1000.0\ntechnology = \"future_stt\"\n",
    )
    .unwrap();
    let bad = spinpim(dir.path(), &["margin", "--config", "flat.toml"]);
    assert_ne!(bad.status.code(), Some(0));
}

#[test]
fn codegen_then_run() {
    let dir = tempfile::tempdir().unwrap();
    let model = SvmModel {
        n_features: 3,
        degree: 2,
        gamma: 1.0 / 512.0,
        coef0: 1.0,
        classes: vec![
            ClassModel {
                rho: 0.1,
                svs: vec![SupportVector { alpha: 1.0, values: vec![255.0, 0.0, 0.0] }],
            },
            ClassModel {
                rho: 0.1,
                svs: vec![SupportVector { alpha: 1.0, values: vec![0.0, 0.0, 255.0] }],
            },
        ],
    };
    model.save(dir.path().join("m.txt")).unwrap();
    let gen = spinpim(dir.path(), &["codegen-svm", "--model", "m.txt", "--out", "svm.bin"]);
    assert!(gen.status.success(), "{}", text(&gen.stderr));
    assert!(dir.path().join("svm.bin.layout.json").exists());
    for (x, class) in [("250,10,0", 0), ("0,10,250", 1)] {
        let out = spinpim(
            dir.path(),
            &["run", "--program", "svm.bin", "--layout", "svm.bin.layout.json", "--input", x],
        );
        assert!(out.status.success(), "{}", text(&out.stderr));
        assert!(text(&out.stderr).contains(&format!("class {class}")), "{}", text(&out.stderr));
    }
}

#[test]
fn assemble_disassemble_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let prog = write_fulladd(dir.path(), CellVariant::Stt);
    let a = spinpim(dir.path(), &["assemble", prog, "-o", "fa.bin"]);
    assert!(a.status.success());
    let d = spinpim(dir.path(), &["disassemble", "fa.bin"]);
    assert!(d.status.success());
    assert_eq!(text(&d.stdout), std::fs::read_to_string(dir.path().join(prog)).unwrap());
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(spinpim(dir.path(), &["bogus"]).status.code(), Some(1));
    assert_eq!(spinpim(dir.path(), &["run", "--duty", "x"]).status.code(), Some(1));
    assert_eq!(spinpim(dir.path(), &["run"]).status.code(), Some(1));
    assert_eq!(spinpim(dir.path(), &["--help"]).status.code(), Some(0));
}
