//! Bit-level simulator for a spintronic processing-in-memory accelerator
//! running from harvested power.

pub mod array;
pub mod cli;
pub mod compiler;
pub mod controller;
pub mod device;
pub mod error;
pub mod isa;
pub mod metrics;
pub mod power;
pub mod svmlab;

pub use error::{Error, Result};
