//! Linear analog circuit models: decoding configurations into controllers or
//! resistive networks, simulating them, and scoring the result.

mod benchmark;
mod network;
mod step;
mod tf;

use thiserror::Error;

use crate::device::{DeviceError, DeviceKind};

pub use benchmark::{
    builtin_benchmarks, evaluate, example2_compensator, find_benchmark, fpta_divider, Benchmark,
    BenchmarkDef, ControllerGains, DcDef, DecodedCircuit, Evaluation, Measurement, RangePolicy,
    StepDef, Task, NO_SETTLE_PENALTY, PLANT_GAIN, SWITCH_CONDUCTANCE,
};
pub use network::{Conductance, ElementSpec, NetworkSpec, ResistiveNetwork};
pub use step::{
    settling_time, step_response, step_response_with, StepOptions, StepResponse, DEFAULT_BAND,
    DEFAULT_DIVERGENCE_FACTOR, DEFAULT_STEPS,
};
pub use tf::{StateSpace, TransferFunction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid transfer function: {0}")]
    InvalidTransferFunction(String),
    #[error("invalid simulation window: {0}")]
    InvalidWindow(String),
    #[error("network: {0}")]
    Network(String),
    #[error("decode: {0}")]
    Decode(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchmarkError {
    #[error("benchmark `{id}`: {reason}")]
    Invalid { id: String, reason: String },
    #[error("benchmark `{benchmark}` needs an {expected} device but `{device}` is an {actual}")]
    DeviceMismatch {
        benchmark: String,
        expected: DeviceKind,
        device: String,
        actual: DeviceKind,
    },
    #[error("configuration was not laid out for benchmark `{0}`")]
    LayoutMismatch(String),
    #[error(transparent)]
    Device(#[from] DeviceError),
}
