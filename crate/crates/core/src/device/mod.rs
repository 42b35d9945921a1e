//! Reconfigurable analog devices, their configuration bitstreams, and the
//! hardware faults that recovery has to work around.

mod config;
mod fault;
mod profile;

use thiserror::Error;

pub use config::{
    gray_decode, gray_encode, random_configuration, read_field, write_field, Bits, Configuration,
    DecodeMap, FieldDef, FieldKind, FieldSpec,
};
pub use fault::{
    apply_fault, apply_faults, EffectiveCircuitState, FaultMode, FaultSpec, FaultTarget,
};
pub use profile::{
    builtin_profiles, find_builtin, load_profiles, parse_profiles, transfer_time, DeviceKind,
    DeviceProfile, ProfileRecord, TransferGeometry,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("device `{0}` has no transfer geometry")]
    MissingTransferGeometry(String),
    #[error("invalid device profile `{name}`: {reason}")]
    InvalidProfile { name: String, reason: String },
    #[error("invalid decode map: {0}")]
    DecodeMap(String),
    #[error("configuration length mismatch: expected {expected} bits, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid fault target: {0}")]
    InvalidTarget(String),
    #[error("profile file: {0}")]
    ProfileSyntax(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}
