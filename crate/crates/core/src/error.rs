use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown gate `{0}`")]
    UnknownGate(String),
    #[error("{gate} takes {expected} input(s), got {got}")]
    Arity {
        gate: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid device parameters: {0}")]
    DeviceParams(String),
    #[error("no feasible drive voltage for {gate}: window [{v_min:.4e}, {v_max:.4e}) V")]
    InfeasibleWindow {
        gate: &'static str,
        v_min: f64,
        v_max: f64,
    },
    #[error("{what} {value} out of range (limit {limit})")]
    OutOfRange {
        what: &'static str,
        value: u64,
        limit: u64,
    },
    #[error("row parity violation: inputs ({in1}, {in2}) must share parity and output {out} must have the opposite")]
    Parity { in1: u16, in2: u16, out: u16 },
    #[error("column activation needs 1..=5 columns, got {0}")]
    ActivationCount(usize),
    #[error("preset violation: {gate} output row {row} column {col} is not at preset {preset}")]
    Preset {
        gate: &'static str,
        row: u16,
        col: u16,
        preset: u8,
    },
    #[error("cannot decode word {0:#018x}: {1}")]
    Decode(u64, &'static str),
    #[error("line {line}, column {column}: {message}")]
    Assembly {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("pc {pc} outside instruction region of {len} words")]
    PcOutOfBounds { pc: u32, len: u32 },
    #[error("simulation exceeded the time limit of {0} s")]
    TimeLimit(f64),
    #[error("negative {0} charged to the ledger")]
    NegativeCharge(&'static str),
    #[error("invalid power trace: {0}")]
    PowerTrace(String),
    #[error("layout: {0}")]
    Layout(String),
    #[error("model: {0}")]
    Model(String),
    #[error("quantization: {0}")]
    Quantization(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
