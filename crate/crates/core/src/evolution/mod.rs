//! Generational evolutionary search over configuration bitstrings, charging
//! every candidate evaluation to a reconfiguration-time ledger.

mod engine;
mod operators;
mod params;

use thiserror::Error;

use crate::analog::BenchmarkError;
use crate::device::DeviceError;

pub use engine::{run, GenerationStats, RunResult, Search, Termination};
pub use operators::{crossover, rank, reproduce, select, truncation_size, Mutator};
pub use params::{EAParams, Preset, Selection, HIGH_PRESSURE_MAX_FRACTION};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid EA parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
    #[error(transparent)]
    Device(#[from] DeviceError),
}
