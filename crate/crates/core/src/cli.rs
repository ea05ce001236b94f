//! Command-line front end.
//!
//! Settings come from an optional TOML file; flags override it. Exit codes:
//! 0 success, 1 usage or configuration error, 2 verification failure.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compiler::{codegen_svm, LayoutFile, SvmCodegenConfig};
use crate::controller::{crash_sweep, cut_points, Granularity, Machine, MachineConfig};
use crate::device::{solve_drive_voltage, CellVariant, DeviceParams, GateKind};
use crate::error::{Error, Result};
use crate::isa::{
    assemble, bytes_to_words, decode_program, disassemble, encode_program, words_to_bytes,
    Instruction,
};
use crate::metrics::{report, EnergyLedger, ReportFormat, ReportRow};
use crate::power::{PowerTrace, ThrottleMode, ThrottlePolicy, DEFAULT_FREQUENCY_HZ};
use crate::svmlab::{quantize, QuantWidths, SvmModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub duty: f64,
    pub frequency: f64,
    /// `on_start,on_end` rows; replaces the square wave.
    pub csv: Option<PathBuf>,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            duty: 1.0,
            frequency: DEFAULT_FREQUENCY_HZ,
            csv: None,
        }
    }
}

/// Everything a simulation command needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `modern_stt`, `future_stt` or `future_she`.
    pub device: String,
    /// Full parameter set; replaces the named preset.
    pub device_params: Option<DeviceParams>,
    pub program: Option<PathBuf>,
    /// Layout JSON from `codegen-svm` or a hand-written preload.
    pub layout: Option<PathBuf>,
    pub input: Option<Vec<u8>>,
    pub trace: TraceConfig,
    pub throttle: ThrottlePolicy,
    pub duties: Vec<f64>,
    pub format: ReportFormat,
    pub out: Option<PathBuf>,
    /// Orders sampled cut points in `fuzz-crash`.
    pub seed: u64,
    pub max_time: f64,
    pub granularity: Granularity,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            device: "future_stt".into(),
            device_params: None,
            program: None,
            layout: None,
            input: None,
            trace: TraceConfig::default(),
            throttle: ThrottlePolicy::default(),
            duties: vec![1.0, 0.5, 0.25, 0.1, 0.01],
            format: ReportFormat::Csv,
            out: None,
            seed: 0,
            max_time: 60.0,
            granularity: Granularity::Full,
        }
    }
}

impl RunConfig {
    /// Parses TOML; relative paths are taken from `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut c: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(q) = p {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        fix(&mut c.program);
        fix(&mut c.layout);
        fix(&mut c.out);
        fix(&mut c.trace.csv);
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn params(&self) -> Result<DeviceParams> {
        let p = match self.device_params {
            Some(p) => p,
            None => DeviceParams::preset(&self.device)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn machine_config(&self) -> Result<MachineConfig> {
        self.throttle.validate()?;
        Ok(MachineConfig {
            throttle: self.throttle,
            max_time: self.max_time,
            ..MachineConfig::with_params(self.params()?)
        })
    }

    pub fn trace_for(&self, duty: f64) -> Result<PowerTrace> {
        match &self.trace.csv {
            Some(p) => PowerTrace::from_csv(p),
            None if duty >= 1.0 => Ok(PowerTrace::continuous()),
            None => PowerTrace::square(self.trace.frequency, duty),
        }
    }

    pub fn trace(&self) -> Result<PowerTrace> {
        self.trace_for(self.trace.duty)
    }

    /// A loaded machine ready to run.
    pub fn machine(&self) -> Result<Machine> {
        let path = self
            .program
            .as_ref()
            .ok_or_else(|| Error::Config("no program given".into()))?;
        let program = load_program(path)?;
        let mut m = Machine::from_program(self.machine_config()?, &program)?;
        if let Some(lp) = &self.layout {
            let text = std::fs::read_to_string(lp)
                .map_err(|e| Error::Config(format!("{}: {e}", lp.display())))?;
            let lf = LayoutFile::from_json(&text)?;
            if let Some(plan) = lf.reduction.clone() {
                m = m.with_reduction(plan)?;
            }
            lf.preload(&mut m, self.input.as_deref())?;
        } else if self.input.is_some() {
            return Err(Error::Config("an input vector needs a layout file".into()));
        }
        Ok(m)
    }
}

/// Assembly text, or raw little-endian words for `.bin` files.
pub fn load_program(path: &Path) -> Result<Vec<Instruction>> {
    let is_bin = path.extension().is_some_and(|e| e == "bin");
    if is_bin {
        let bytes = std::fs::read(path)?;
        decode_program(&bytes_to_words(&bytes)?)
    } else {
        assemble(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Parser)]
#[command(name = "spinpim", version, about = "Spintronic PIM simulator and compiler")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a program and report time and energy.
    Run(SimArgs),
    /// Run a program at several duty cycles.
    SweepDuty(SweepArgs),
    /// Inject a power cut at every cut point and compare against a clean run.
    FuzzCrash(FuzzArgs),
    /// Drive-voltage windows for every gate.
    Margin(MarginArgs),
    /// Assembly text to binary words.
    Assemble(AsmArgs),
    /// Binary words to assembly text.
    Disassemble(AsmArgs),
    /// Generate an SVM inference program and its layout.
    CodegenSvm(CodegenArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub device: Option<String>,
    #[arg(long)]
    pub program: Option<PathBuf>,
    #[arg(long)]
    pub layout: Option<PathBuf>,
    /// Comma-separated 8-bit input vector.
    #[arg(long, value_delimiter = ',')]
    pub input: Option<Vec<u8>>,
    #[arg(long)]
    pub duty: Option<f64>,
    /// Square-wave frequency, Hz.
    #[arg(long)]
    pub frequency: Option<f64>,
    /// CSV of power-on intervals.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Power budget, watts.
    #[arg(long)]
    pub budget: Option<f64>,
    /// static, per-instruction or off.
    #[arg(long)]
    pub throttle: Option<String>,
    #[arg(long)]
    pub format: Option<ReportFormat>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simulated-time limit, seconds.
    #[arg(long)]
    pub max_time: Option<f64>,
}

impl SimArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(d) = &self.device {
            c.device = d.clone();
            c.device_params = None;
        }
        macro_rules! over {
            ($($f:ident => $dst:expr),*) => {$(
                if let Some(v) = self.$f.clone() { $dst = v.into(); }
            )*};
        }
        over!(program => c.program, layout => c.layout, input => c.input,
              duty => c.trace.duty, frequency => c.trace.frequency, trace => c.trace.csv,
              budget => c.throttle.budget, format => c.format, out => c.out,
              seed => c.seed, max_time => c.max_time);
        if let Some(t) = &self.throttle {
            c.throttle.mode = match t.as_str() {
                "static" => ThrottleMode::Static,
                "per-instruction" | "per_instruction" => ThrottleMode::PerInstruction,
                "off" => ThrottleMode::Off,
                _ => return Err(Error::Config(format!("unknown throttle mode `{t}`"))),
            };
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Comma-separated duty cycles.
    #[arg(long, value_delimiter = ',')]
    pub duties: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct FuzzArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// boundaries (or boundaries-only) or full.
    #[arg(long)]
    pub granularity: Option<Granularity>,
    /// Test a seeded random sample of this many cut points.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct MarginArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub device: Option<String>,
    /// Access transistor resistance, ohms.
    #[arg(long)]
    pub transistor: Option<f64>,
    #[arg(long)]
    pub format: Option<ReportFormat>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AsmArgs {
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CodegenArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// stt or she.
    #[arg(long, default_value = "stt")]
    pub target: String,
    /// Program output; `.bin` writes binary words, anything else assembly.
    #[arg(long)]
    pub out: PathBuf,
    /// Layout JSON output; defaults to the program path with `.layout.json`.
    #[arg(long)]
    pub layout: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub alpha_bits: u32,
    #[arg(long, default_value_t = 16)]
    pub t_bits: u32,
    #[arg(long, default_value_t = 0)]
    pub tile: u16,
    #[arg(long, default_value_t = 1)]
    pub score_tile: u16,
}

/// Command result: `Ok(true)` passes, `Ok(false)` is a verification failure.
pub type Outcome = Result<bool>;

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn cmd_run(c: &RunConfig) -> Result<(EnergyLedger, Option<Vec<i64>>)> {
    let mut m = c.machine()?;
    let l = m.run(&c.trace()?, None)?;
    Ok((l, m.scores()))
}

fn run(args: &SimArgs) -> Outcome {
    let c = args.resolve()?;
    let (l, scores) = cmd_run(&c)?;
    let duty = if c.trace.csv.is_some() { 0.0 } else { c.trace.duty };
    emit(c.out.as_deref(), &report(&[ReportRow::new(duty, &l)], c.format))?;
    if let Some(s) = scores {
        eprintln!("scores {:?} class {}", s, crate::svmlab::argmax(&s));
    }
    Ok(true)
}

/// One ledger per duty, in the given order.
pub fn cmd_sweep_duty(c: &RunConfig, duties: &[f64]) -> Result<Vec<ReportRow>> {
    let base = c.machine()?;
    duties
        .par_iter()
        .map(|&d| {
            let mut m = base.clone();
            let l = m.run(&c.trace_for(d)?, None)?;
            Ok(ReportRow::new(d, &l))
        })
        .collect()
}

fn sweep(args: &SweepArgs) -> Outcome {
    let mut c = args.sim.resolve()?;
    if let Some(d) = &args.duties {
        c.duties = d.clone();
    }
    if c.duties.is_empty() {
        return Err(Error::Config("no duty cycles".into()));
    }
    let rows = cmd_sweep_duty(&c, &c.duties)?;
    emit(c.out.as_deref(), &report(&rows, c.format))?;
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
struct VerdictRow {
    cut: String,
    pass: bool,
    re_executed: u64,
    divergence: Option<String>,
    error: Option<String>,
}

pub fn cmd_fuzz_crash(
    c: &RunConfig,
    granularity: Granularity,
    limit: Option<usize>,
) -> Result<crate::controller::SweepReport> {
    let m = c.machine()?;
    let mut cuts = cut_points(&m, granularity);
    if let Some(n) = limit {
        if n < cuts.len() {
            let mut idx: Vec<usize> = (0..cuts.len()).collect();
            idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(c.seed));
            idx.truncate(n);
            idx.sort_unstable();
            cuts = idx.into_iter().map(|i| cuts[i]).collect();
        }
    }
    crash_sweep(&m, &c.trace()?, &cuts)
}

fn fuzz(args: &FuzzArgs) -> Outcome {
    let mut c = args.sim.resolve()?;
    if let Some(g) = args.granularity {
        c.granularity = g;
    }
    let rep = cmd_fuzz_crash(&c, c.granularity, args.limit)?;
    let rows: Vec<VerdictRow> = rep
        .outcomes
        .iter()
        .map(|o| VerdictRow {
            cut: o.cut.to_string(),
            pass: o.pass,
            re_executed: o.re_executed,
            divergence: o.divergence.map(|a| a.to_string()),
            error: o.error.clone(),
        })
        .collect();
    let text = match c.format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&rows).expect("plain data serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &rows {
                w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
            }
            String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?)
                .expect("csv output is utf-8")
        }
    };
    emit(c.out.as_deref(), &text)?;
    eprintln!(
        "{}/{} cut points pass ({} golden instructions)",
        rep.passed(),
        rep.outcomes.len(),
        rep.golden_instructions
    );
    if let Some(f) = rep.first_failure() {
        match (&f.divergence, &f.error) {
            (Some(a), _) => eprintln!("first failure at {}: divergent cell {a}", f.cut),
            (None, Some(e)) => eprintln!("first failure at {}: {e}", f.cut),
            (None, None) => eprintln!(
                "first failure at {}: {} instructions re-executed",
                f.cut, f.re_executed
            ),
        }
    }
    Ok(rep.all_pass())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "PascalCase")]
pub struct MarginRow {
    pub gate: &'static str,
    /// Volts.
    pub v_min: f64,
    pub v_max: f64,
    pub feasible: bool,
}

pub fn cmd_margin(params: &DeviceParams) -> Result<Vec<MarginRow>> {
    GateKind::ALL
        .iter()
        .map(|&g| {
            let w = solve_drive_voltage(g, params)?;
            Ok(MarginRow {
                gate: g.name(),
                v_min: w.v_min,
                v_max: w.v_max,
                feasible: w.feasible,
            })
        })
        .collect()
}

fn margin(args: &MarginArgs) -> Outcome {
    let mut c = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &args.device {
        c.device = d.clone();
        c.device_params = None;
    }
    if let Some(f) = args.format {
        c.format = f;
    }
    let mut params = match c.device_params {
        Some(p) => p,
        None => DeviceParams::preset(&c.device)?,
    };
    if let Some(r) = args.transistor {
        params = params.with_transistor(r);
    }
    let rows = cmd_margin(&params)?;
    let text = match c.format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&rows).expect("plain data serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut s = String::from("Gate,VMin,VMax,Feasible\n");
            for r in &rows {
                let _ = writeln!(s, "{},{},{},{}", r.gate, r.v_min, r.v_max, r.feasible);
            }
            s
        }
    };
    emit(args.out.as_deref().or(c.out.as_deref()), &text)?;
    let bad: Vec<&str> = rows.iter().filter(|r| !r.feasible).map(|r| r.gate).collect();
    if !bad.is_empty() {
        eprintln!("infeasible gates: {}", bad.join(", "));
    }
    Ok(bad.is_empty())
}

fn write_program(path: &Path, program: &[Instruction]) -> Result<()> {
    if path.extension().is_some_and(|e| e == "bin") {
        std::fs::write(path, words_to_bytes(&encode_program(program)))?;
    } else {
        std::fs::write(path, disassemble(program))?;
    }
    Ok(())
}

fn assemble_cmd(args: &AsmArgs) -> Outcome {
    let prog = assemble(&std::fs::read_to_string(&args.input)?)?;
    let bytes = words_to_bytes(&encode_program(&prog));
    match &args.out {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    Ok(true)
}

fn disassemble_cmd(args: &AsmArgs) -> Outcome {
    let prog = decode_program(&bytes_to_words(&std::fs::read(&args.input)?)?)?;
    emit(args.out.as_deref(), &disassemble(&prog))?;
    Ok(true)
}

fn codegen(args: &CodegenArgs) -> Outcome {
    let target = match args.target.to_ascii_lowercase().as_str() {
        "stt" => CellVariant::Stt,
        "she" => CellVariant::She,
        t => return Err(Error::Config(format!("unknown target `{t}`"))),
    };
    let model = SvmModel::load(&args.model)?;
    let q = quantize(
        &model,
        QuantWidths {
            alpha_bits: args.alpha_bits,
            t_bits: args.t_bits,
        },
    )?;
    let cfg = SvmCodegenConfig {
        target,
        tile: args.tile,
        score_tile: args.score_tile,
    };
    let prog = codegen_svm(&q, &cfg)?;
    write_program(&args.out, &prog.program.instructions)?;
    let layout = args.layout.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".layout.json");
        PathBuf::from(p)
    });
    std::fs::write(&layout, prog.layout_file().to_json())?;
    eprintln!(
        "{} instructions, {} lanes, shift {}, layout {}",
        prog.program.len(),
        prog.lanes.len(),
        q.shift,
        layout.display()
    );
    Ok(true)
}

pub fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Run(a) => run(a),
        Command::SweepDuty(a) => sweep(a),
        Command::FuzzCrash(a) => fuzz(a),
        Command::Margin(a) => margin(a),
        Command::Assemble(a) => assemble_cmd(a),
        Command::Disassemble(a) => disassemble_cmd(a),
        Command::CodegenSvm(a) => codegen(a),
    }
}

/// Parses `args` and runs the command.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.toml");
        std::fs::write(
            &cfg,
            "device = \"modern_stt\"\nprogram = \"p.s\"\n[trace]\nduty = 0.5\n[throttle]\nbudget = 1e-4\n",
        )
        .unwrap();
        let a = SimArgs {
            config: Some(cfg),
            duty: Some(0.25),
            ..SimArgs::default()
        };
        let c = a.resolve().unwrap();
        assert_eq!(c.device, "modern_stt");
        assert_eq!(c.trace.duty, 0.25);
        assert_eq!(c.throttle.budget, 1e-4);
        assert_eq!(c.program.unwrap(), dir.path().join("p.s"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("devcie = \"x\"\n", Path::new(".")).is_err());
        assert!(RunConfig::from_toml("[trace]\nduty = \"high\"\n", Path::new(".")).is_err());
    }

    #[test]
    fn margin_future_stt_all_feasible() {
        let rows = cmd_margin(&DeviceParams::future_stt()).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.feasible));
    }

    #[test]
    fn margin_degenerate_all_infeasible() {
        let p = DeviceParams {
            r_ap: DeviceParams::future_stt().r_p,
            ..DeviceParams::future_stt()
        };
        assert!(cmd_margin(&p).unwrap().iter().all(|r| !r.feasible));
    }

    #[test]
    fn usage_error_exits_one() {
        assert_eq!(main_with_args(["spinpim", "no-such-command"]), ExitCode::from(1));
        assert_eq!(main_with_args(["spinpim", "run"]), ExitCode::from(1));
    }
}
