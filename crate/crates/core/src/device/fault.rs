use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::config::{Bits, Configuration, DecodeMap};
use super::{DeviceError, DeviceProfile};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultTarget {
    /// Configuration bit index.
    Switch(usize),
    /// FPAA module / FPTA cell index.
    Module(u32),
    /// Named parameter: a decoded field or a physical circuit parameter.
    Parameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FaultMode {
    StuckOpen,
    StuckClosed,
    ModuleDead,
    ParameterDrift { multiplier: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaultSpec {
    pub target: FaultTarget,
    pub mode: FaultMode,
    /// When the fault occurred, in simulated time. Recovery timing starts at
    /// detection, so this is carried for reporting only.
    pub onset: Duration,
}

impl FaultSpec {
    pub fn stuck_open(bit: usize) -> Self {
        Self {
            target: FaultTarget::Switch(bit),
            mode: FaultMode::StuckOpen,
            onset: Duration::ZERO,
        }
    }

    pub fn stuck_closed(bit: usize) -> Self {
        Self {
            target: FaultTarget::Switch(bit),
            mode: FaultMode::StuckClosed,
            onset: Duration::ZERO,
        }
    }

    pub fn module_dead(module: u32) -> Self {
        Self {
            target: FaultTarget::Module(module),
            mode: FaultMode::ModuleDead,
            onset: Duration::ZERO,
        }
    }

    pub fn drift(parameter: impl Into<String>, multiplier: f64) -> Self {
        Self {
            target: FaultTarget::Parameter(parameter.into()),
            mode: FaultMode::ParameterDrift { multiplier },
            onset: Duration::ZERO,
        }
    }

    /// Checks target and mode against a device and its decode map.
    pub fn validate(&self, device: &DeviceProfile, map: &DecodeMap) -> Result<(), DeviceError> {
        let bad = |msg: String| Err(DeviceError::InvalidTarget(msg));
        match (&self.mode, &self.target) {
            (FaultMode::StuckOpen | FaultMode::StuckClosed, FaultTarget::Switch(bit)) => {
                if *bit >= map.len() {
                    return bad(format!(
                        "switch {bit} is outside the {}-bit configuration",
                        map.len()
                    ));
                }
            }
            (FaultMode::ModuleDead, FaultTarget::Module(m)) => {
                if *m >= device.size() {
                    return bad(format!(
                        "{} {m} does not exist on {} ({} {})",
                        if device.kind() == super::DeviceKind::Fpaa {
                            "module"
                        } else {
                            "cell"
                        },
                        device.name(),
                        device.size(),
                        device.kind().size_unit()
                    ));
                }
            }
            (FaultMode::ParameterDrift { multiplier }, FaultTarget::Parameter(id)) => {
                if !(multiplier.is_finite() && *multiplier > 0.0) {
                    return bad(format!("drift multiplier {multiplier} must be positive"));
                }
                if !map.has_parameter(id) {
                    return bad(format!("no parameter `{id}` on this circuit"));
                }
            }
            (mode, target) => return bad(format!("fault mode {mode:?} cannot target {target:?}")),
        }
        Ok(())
    }
}

/// What the damaged hardware actually realizes for a given configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveCircuitState {
    pub bits: Bits,
    pub dead_modules: BTreeSet<u32>,
    /// Multiplicative drift per parameter id; absent means 1.
    pub drift: BTreeMap<String, f64>,
    pub decode_map: Arc<DecodeMap>,
    pub device: Arc<DeviceProfile>,
}

impl EffectiveCircuitState {
    pub fn fault_free(config: &Configuration) -> Self {
        Self {
            bits: config.bits().clone(),
            dead_modules: BTreeSet::new(),
            drift: BTreeMap::new(),
            decode_map: config.decode_map().clone(),
            device: config.device().clone(),
        }
    }

    pub fn drift_of(&self, parameter: &str) -> f64 {
        self.drift.get(parameter).copied().unwrap_or(1.0)
    }

    fn apply(&mut self, fault: &FaultSpec) -> Result<(), DeviceError> {
        fault.validate(&self.device, &self.decode_map)?;
        match (&fault.mode, &fault.target) {
            (FaultMode::StuckOpen, FaultTarget::Switch(bit)) => self.bits.set(*bit, false),
            (FaultMode::StuckClosed, FaultTarget::Switch(bit)) => self.bits.set(*bit, true),
            (FaultMode::ModuleDead, FaultTarget::Module(m)) => {
                self.dead_modules.insert(*m);
            }
            (FaultMode::ParameterDrift { multiplier }, FaultTarget::Parameter(id)) => {
                *self.drift.entry(id.clone()).or_insert(1.0) *= multiplier;
            }
            _ => unreachable!("validate rejects mismatched mode/target"),
        }
        Ok(())
    }
}

/// Effective state of `config` on hardware carrying `fault`. The stored
/// configuration is left untouched.
pub fn apply_fault(
    config: &Configuration,
    fault: &FaultSpec,
) -> Result<EffectiveCircuitState, DeviceError> {
    apply_faults(config, std::slice::from_ref(fault))
}

pub fn apply_faults(
    config: &Configuration,
    faults: &[FaultSpec],
) -> Result<EffectiveCircuitState, DeviceError> {
    let mut state = EffectiveCircuitState::fault_free(config);
    for f in faults {
        state.apply(f)?;
    }
    Ok(state)
}


#[cfg(test)]
mod proptests {
    use super::*;
    use crate::device::{find_builtin, random_configuration};
    use proptest::prelude::*;

    fn arb_fault(len: usize) -> impl Strategy<Value = FaultSpec> {
        prop_oneof![
            (0..len).prop_map(FaultSpec::stuck_open),
            (0..len).prop_map(FaultSpec::stuck_closed),
            (0u32..64).prop_map(FaultSpec::module_dead),
        ]
    }

    proptest! {
        #[test]
        fn fault_touches_only_its_target(seed in any::<u64>(), fault in arb_fault(4096)) {
            let c = random_configuration(&find_builtin("FPTA2").unwrap(), seed);
            let clean = EffectiveCircuitState::fault_free(&c);
            let a = apply_fault(&c, &fault).unwrap();
            let b = apply_fault(&c, &fault).unwrap();
            prop_assert_eq!(&a, &b);
            let changed: Vec<usize> = (0..c.len()).filter(|&i| a.bits[i] != clean.bits[i]).collect();
            match fault.target {
                FaultTarget::Switch(k) => prop_assert!(changed.iter().all(|&i| i == k)),
                FaultTarget::Module(m) => {
                    prop_assert!(changed.is_empty());
                    prop_assert_eq!(a.dead_modules.iter().copied().collect::<Vec<_>>(), vec![m]);
                }
                FaultTarget::Parameter(_) => unreachable!(),
            }
        }
    }
}
